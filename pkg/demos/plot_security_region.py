"""
The secure henchman rate Gamma(R_K, D_E)
========================================

Gamma is the lower convex envelope of min{R_K, R(D)} read off at D_E. The
henchman's best plan timeshares: on a fraction 1 - lambda of the blocks
it sends the key-sized index, on the rest it describes the source at
distortion D = D_E / lambda.
"""

import numpy as np

from secrate import DistortionMeasure, RegionPoint, Source, gamma, is_achievable, rd_curve, surface_sample

coin = Source.bernoulli(0.5)
ham = DistortionMeasure.hamming(2)
curve = rd_curve(coin, ham)

# Lossless wiretapper: Gamma(R_K, 0) = min{R_K, H(S)}
for rk in (0.25, 0.5, 1.0, 1.5):
    print(f"Gamma({rk}, 0) = {gamma(rk, 0.0, curve).value:.6f}")

# With a little distortion allowed the optimum mixes both strategies
g = gamma(0.5, 0.05, curve)
print(f"\nGamma(0.5, 0.05) = {g.value:.6f} with lambda* = {g.lambda_star:.4f}, D* = {g.d_star:.4f}")
print(f"  grid cross-check  {g.check_value:.6f}")

# Membership in the achievable region
for pt in (RegionPoint(0.9, 1.0, 0.0, 0.0), RegionPoint(1.0, 0.5, 0.40, 0.05), RegionPoint(1.0, 0.5, 0.45, 0.05)):
    print(is_achievable(pt, coin, ham, curve).reason)

# A coarse slice of the surface
table = surface_sample(coin, ham, np.linspace(0, 1, 5), np.linspace(0, 0.5, 6), curve)
G = table[:, 2].reshape(5, 6)
print("\nrows R_K = 0 .. 1, columns D_E = 0 .. 0.5")
print(np.array2string(G, precision=3))
