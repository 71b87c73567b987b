"""
Binning cipher: encode, pad, decode
===================================

Codewords are drawn i.i.d. from the source and split into bins. The bin
index travels in the clear and the index inside the bin is padded with the
key, so a wiretapper learns only which bin was used.
"""

import numpy as np

from secrate import DistortionMeasure, Source, decode, encode, equivocation, generate_codebook, sample_iid
from secrate.source import typical_set_probability

src = Source.bernoulli(0.2)
cb = generate_codebook(src, n=12, R=0.9, R_K=0.3, seed=4)
print(f"{cb.num_bins} bins of {cb.bin_size}; rate lost to rounding {cb.rate_loss:.3f} bits/symbol")

rng = np.random.default_rng(0)
blocks = sample_iid(src, 12 * 2000, rng).reshape(-1, 12)
keys = rng.integers(cb.bin_size, size=len(blocks))
ok = 0
hits = 0
for s, k in zip(blocks, keys):
    out = encode(s, int(k), cb, delta=0.25, seed=rng)
    hits += out.success
    ok += out.success and np.array_equal(decode(out.message, int(k), cb), s)
print(f"encoded {hits} of {len(blocks)} blocks, all {ok} decoded exactly")
print(f"P[typical] = {typical_set_probability(src, 12, 0.25):.4f} caps the success rate at this n")

# The wiretapper's uncertainty about a tiny code, by exact enumeration
tiny = generate_codebook(Source.bernoulli(0.5), 2, 1.0, 0.5, seed=0)
print(f"n=2 code: H(S^n|M)/n = {equivocation(tiny, 0.5):.4f} bits/symbol")
