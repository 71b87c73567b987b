"""
Rate-distortion curves by Blahut-Arimoto
========================================

The solver works at a fixed Lagrange slope. Sweeping the slope traces out
the convex curve R(D); bisecting it hits a requested distortion.
"""

import numpy as np

from secrate import DistortionMeasure, Source, binary_hamming_rd, blahut_arimoto, rd_at_distortion, rd_curve

# A fair coin under Hamming distortion has the closed form 1 - Hb(D)
coin = Source.bernoulli(0.5)
ham = DistortionMeasure.hamming(2)
curve = rd_curve(coin, ham)
D = np.linspace(0, 0.5, 11)
print("D      R(D) sampled   1 - Hb(D)")
for d in D:
    print(f"{d:.2f}   {curve.rate_at(d):.6f}       {binary_hamming_rd(0.5, d):.6f}")

# One slope gives one point, and the duality gap bounds its error
pt = blahut_arimoto(Source.bernoulli(0.3), ham, np.log2(9.0))
print(f"\nslope log2(9) on Bern(0.3): D = {pt.distortion:.6f}, R = {pt.rate:.6f}, gap = {pt.gap:.1e}")

# A ternary source with a distance-like distortion has no closed form
src = Source([0.5, 0.3, 0.2])
dist = DistortionMeasure([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
for d in (0.1, 0.3, 0.6):
    p = rd_at_distortion(src, dist, d)
    print(f"ternary R({d}) = {p.rate:.6f}, slope {p.slope:.4f}")
print(f"ternary curve: {len(rd_curve(src, dist).points)} points, d_max = {rd_curve(src, dist).d_max}")
