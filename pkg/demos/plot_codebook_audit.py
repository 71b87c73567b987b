"""
Auditing random codebooks
=========================

Three counting events describe a good codebook: few typical codewords
near any reconstruction within a bin (A2), enough typical codewords per bin
(A3), and a balanced number of copies of each typical sequence (A4). At
small n their frequencies over random codebooks show how far the code is
from the asymptotic regime.
"""

from secrate import DistortionMeasure, Source, audit, generate_codebook, rd_curve
from secrate.source import typical_set_probability

src = Source.bernoulli(0.2)
ham = DistortionMeasure.hamming(2)
curve = rd_curve(src, ham)
for n in (8, 12, 16):
    reps = [audit(generate_codebook(src, n, 0.9, 0.3, seed), ham, 0.25, 0.15, curve) for seed in range(10)]
    freq = [sum(getattr(r, e) for r in reps) / len(reps) for e in ("A2", "A3", "A4")]
    r = reps[0]
    print(f"n={n:2d}  P[typ]={typical_set_probability(src, n, 0.25):.3f}  "
          f"A2/A3/A4 = {freq}  min gamma {r.min_gamma} vs {r.gamma_threshold:.1f}  sampled={r.sampled}")
