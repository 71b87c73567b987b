"""
Henchman attacks around the secure rate
=======================================

Below Gamma(R_K, D_E) no strategy helps the wiretapper; above it,
timesharing between sending the key-sized index and covering the source
with a random code succeeds.
"""

import numpy as np

from secrate import DistortionMeasure, Source, gamma, generate_codebook, observe, rd_curve
from secrate.attacks import InsufficientBudget, key_index_attack, rd_attack, timesharing_attack

coin = Source.bernoulli(0.5)
ham = DistortionMeasure.hamming(2)
g = gamma(0.3, 0.1, rd_curve(coin, ham)).value
cb = generate_codebook(coin, 10, 1.5, 0.3, seed=1)
l, trials = 20, 40
print(f"Gamma(0.3, 0.1) = {g:.4f}")

for budget in (g - 0.1, g, g + 0.1):
    rd_ok = ts_ok = 0
    for t in range(trials):
        obs = observe(cb, l, 0.9, seed=t)
        rd_ok += rd_attack(obs, ham, 0.1, budget, seed=t).success
        best = False
        for lam in np.linspace(0, 1, 21):
            k = int(np.ceil((1 - lam) * l - 1e-9))
            D = min(0.1 * l / (l - k), 0.5) if k < l else 0.0
            try:
                best |= timesharing_attack(obs, ham, lam, D, budget, seed=t, D_E=0.1).success
            except InsufficientBudget:
                pass
        ts_ok += best
    print(f"budget {budget:.3f}: covering alone {rd_ok / trials:.2f}, best timesharing {ts_ok / trials:.2f}")

obs = observe(cb, l, 0.9, seed=99)
r = key_index_attack(obs, ham)
print(f"key index alone: {r.rate_spent:.2f} bits/symbol, distortion {r.distortion}")
