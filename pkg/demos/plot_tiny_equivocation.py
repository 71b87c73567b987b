"""
Distortion-based equivocation of a tiny code
============================================

At n = 2 the wiretapper's posterior over source blocks can be written out
exactly, and the conditional rate-distortion problem solved with one common
Lagrange slope across messages.
"""

import numpy as np

from secrate import CipherMessage, DistortionMeasure, Source, equivocation, generate_codebook, r_de_estimate
from secrate.attacks import brute_force_min_rate
from secrate.codec import Codebook

coin = Source.bernoulli(0.5)
ham = DistortionMeasure.hamming(2)
for seed in range(3):
    cb = generate_codebook(coin, 2, 1.0, 0.5, seed)
    vals = [r_de_estimate(cb, ham, d, 0.5) for d in (0.0, 0.1, 0.25, 0.5)]
    print(f"seed {seed}: codewords {cb.codewords.tolist()}  H(S^n|M)/n = {equivocation(cb, 0.5):.4f}")
    print("   r_de at D_E = 0, 0.1, 0.25, 0.5:", np.round(vals, 4))

# Lists of guesses: how many bits a helper needs to point at the right word
cb = Codebook.from_codewords([[0, 1, 1], [1, 0, 1], [1, 1, 0], [0, 0, 1]], 1, [0.5, 0.5])
m = CipherMessage(0, 0)
for de, cov in [(0.0, 1.0), (0.0, 0.5), (1 / 3, 1.0), (1.0, 1.0)]:
    res = brute_force_min_rate(cb, m, de, cov, 0.5)
    print(f"D_E={de:.2f} coverage={cov}: {res.bits:.0f} bits, list {[list(map(int, c)) for c in res.centers]}")
