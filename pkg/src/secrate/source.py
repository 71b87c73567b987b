"""
Finite-alphabet memoryless sources, types, strong typicality and
per-letter distortion bookkeeping.

Sequences are numpy integer arrays with symbols ``0 .. alphabet_size-1``.
Block distortion is always the per-symbol average, so distortion
thresholds do not depend on the blocklength.
"""

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln


class CapExceeded(RuntimeError):
    """An exhaustive enumeration would exceed its configured size cap."""


def make_rng(seed=None):
    """Return a ``numpy.random.Generator``; generators pass through untouched."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True, eq=False)
class Source:
    pmf: np.ndarray

    def __post_init__(self):
        pmf = np.asarray(self.pmf, dtype=float).ravel()
        if pmf.size < 1:
            raise ValueError("source alphabet must be nonempty")
        if np.any(~np.isfinite(pmf)) or np.any(pmf < 0):
            raise ValueError("pmf entries must be finite and nonnegative")
        if abs(pmf.sum() - 1.0) > 1e-12:
            raise ValueError(f"pmf sums to {pmf.sum()!r}, not 1")
        pmf.setflags(write=False)
        object.__setattr__(self, "pmf", pmf)

    @property
    def alphabet_size(self):
        return self.pmf.size

    @classmethod
    def bernoulli(cls, p):
        return cls([1.0 - p, p])

    @classmethod
    def uniform(cls, k):
        return cls(np.full(k, 1.0 / k))

    def __repr__(self):
        return f"Source(pmf={self.pmf.tolist()})"


@dataclass(frozen=True, eq=False)
class DistortionMeasure:
    """Per-letter distortion ``matrix[s, z]``; rows are source symbols."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float, ndmin=2)
        if m.ndim != 2:
            raise ValueError("distortion matrix must be 2-D")
        if np.any(~np.isfinite(m)) or np.any(m < 0):
            raise ValueError("distortion entries must be finite and nonnegative")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def source_alphabet_size(self):
        return self.matrix.shape[0]

    @property
    def recon_alphabet_size(self):
        return self.matrix.shape[1]

    @classmethod
    def hamming(cls, k):
        return cls(1.0 - np.eye(k))

    def is_hamming(self):
        k = self.source_alphabet_size
        return self.matrix.shape == (k, k) and np.array_equal(self.matrix, 1.0 - np.eye(k))

    def __repr__(self):
        return f"DistortionMeasure(matrix={self.matrix.tolist()})"


@dataclass(frozen=True)
class TypeVector:
    counts: tuple
    n: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "counts", tuple(int(c) for c in self.counts))
        object.__setattr__(self, "n", sum(self.counts))

    @property
    def pmf(self):
        return np.asarray(self.counts, dtype=float) / self.n


@dataclass(frozen=True)
class TypicalityParams:
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")


def _delta(params):
    return params.delta if isinstance(params, TypicalityParams) else float(params)


def entropy(source):
    """Entropy of ``source`` in bits, with ``0 log 0 = 0``."""
    p = source.pmf if isinstance(source, Source) else np.asarray(source, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def sample_iid(source, n, seed=None):
    """Draw ``n`` i.i.d. symbols. The same seed always yields the same sequence."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = make_rng(seed)
    cdf = np.cumsum(source.pmf)
    cdf[-1] = 1.0
    u = rng.random(n)
    return np.searchsorted(cdf, u, side="right").astype(np.int64)


def empirical_type(seq, alphabet_size=None):
    seq = np.asarray(seq, dtype=np.int64).ravel()
    if seq.size == 0:
        raise ValueError("empty sequence")
    if alphabet_size is None:
        alphabet_size = int(seq.max()) + 1
    if seq.min() < 0 or seq.max() >= alphabet_size:
        raise ValueError("symbol outside alphabet")
    return TypeVector(np.bincount(seq, minlength=alphabet_size))


def _typical_counts(counts, pmf, delta):
    # |T(a) - P(a)| < delta * P(a) for every a; vectorised over rows of counts.
    # The slack keeps boundary types (equality in exact arithmetic) out.
    counts = np.asarray(counts, dtype=float)
    n = counts.sum(axis=-1, keepdims=True)
    inside = np.abs(counts / n - pmf) < delta * pmf - 1e-12
    # a zero-probability symbol must simply be absent
    inside = np.where(pmf > 0, inside, counts == 0)
    return np.all(inside, axis=-1)


def is_strongly_typical(seq, source, params):
    t = empirical_type(seq, source.alphabet_size)
    return bool(_typical_counts(t.counts, source.pmf, _delta(params)))


def typical_mask(seqs, source, params):
    """Row-wise strong typicality of a 2-D array of sequences."""
    seqs = np.atleast_2d(np.asarray(seqs, dtype=np.int64))
    k = source.alphabet_size
    counts = np.stack([(seqs == a).sum(axis=1) for a in range(k)], axis=1)
    return _typical_counts(counts, source.pmf, _delta(params))


def compositions(n, k):
    """All length-``k`` nonnegative integer vectors summing to ``n``."""
    out = []
    for bars in itertools.combinations(range(n + k - 1), k - 1):
        prev = -1
        row = []
        for b in bars:
            row.append(b - prev - 1)
            prev = b
        row.append(n + k - 1 - prev - 1)
        out.append(row)
    return np.array(out, dtype=np.int64).reshape(-1, k)


def log_multinomial(n, counts):
    counts = np.asarray(counts)
    return gammaln(n + 1) - gammaln(counts + 1).sum(axis=-1)


def typical_set_size(source, n, params, cap=10**7):
    """Number of strongly typical sequences, counted by type."""
    k = source.alphabet_size
    if math.comb(n + k - 1, k - 1) > cap:
        raise CapExceeded("too many types to enumerate")
    types = compositions(n, k)
    keep = _typical_counts(types, source.pmf, _delta(params))
    return sum(math.factorial(n) // math.prod(math.factorial(c) for c in t) for t in types[keep])


def typical_set_probability(source, n, params, cap=10**7):
    """Exact ``P[S^n is strongly typical]`` by type enumeration."""
    k = source.alphabet_size
    if math.comb(n + k - 1, k - 1) > cap:
        raise CapExceeded("too many types to enumerate")
    types = compositions(n, k)
    keep = _typical_counts(types, source.pmf, _delta(params))
    if not np.any(keep):
        return 0.0
    types = types[keep]
    with np.errstate(divide="ignore"):
        logp = np.log(source.pmf)
    # 0 * log 0 = 0
    terms = np.where(types > 0, types * logp, 0.0).sum(axis=1)
    return float(np.exp(log_multinomial(n, types) + terms).sum())


def block_distortion(s_seq, z_seq, measure):
    s = np.asarray(s_seq, dtype=np.int64)
    z = np.asarray(z_seq, dtype=np.int64)
    if s.shape != z.shape:
        raise ValueError(f"length mismatch: {s.shape} vs {z.shape}")
    return float(measure.matrix[s, z].mean(axis=-1))


def block_distortions(s_seqs, z_seqs, measure):
    """Row-wise version of :func:`block_distortion` (broadcasting allowed)."""
    s = np.asarray(s_seqs, dtype=np.int64)
    z = np.asarray(z_seqs, dtype=np.int64)
    return measure.matrix[s, z].mean(axis=-1)


def _merge_close(values, tol=1e-12):
    values = np.sort(np.asarray(values, dtype=float))
    if values.size == 0:
        return values
    keep = np.ones(values.size, dtype=bool)
    last = values[0]
    for i in range(1, values.size):
        if values[i] - last <= tol * max(1.0, abs(last)):
            keep[i] = False
        else:
            last = values[i]
    return values[keep]


def enumerate_distortion_levels(measure, n, cap=10**6):
    """The set of all achievable block distortions ``d(s^n, z^n)``.

    A block distortion depends only on the joint type of ``(s^n, z^n)``,
    and in fact only on how many positions take each distinct per-letter
    value, so the enumeration runs over multisets of those values.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    values = np.unique(measure.matrix)
    m = values.size
    if math.comb(n + m - 1, m - 1) > cap:
        raise CapExceeded(f"{math.comb(n + m - 1, m - 1)} distortion types exceed cap {cap}")
    counts = compositions(n, m)
    return _merge_close(counts @ values / n)


def all_sequences(alphabet_size, n, cap=1 << 20):
    """Every sequence in lexicographic order (first symbol most significant)."""
    total = alphabet_size**n
    if total > cap:
        raise CapExceeded(f"{total} sequences exceed cap {cap}")
    return np.array(list(itertools.product(range(alphabet_size), repeat=n)), dtype=np.int64).reshape(total, n)


def sequence_probabilities(source, seqs):
    seqs = np.atleast_2d(seqs)
    return np.prod(source.pmf[seqs], axis=1)


def block_measure(measure, n, cap=1 << 12):
    """Distortion measure on the super-alphabets ``S^n x Z^n`` (per-symbol mean)."""
    s_all = all_sequences(measure.source_alphabet_size, n, cap)
    z_all = all_sequences(measure.recon_alphabet_size, n, cap)
    mat = measure.matrix[s_all[:, None, :], z_all[None, :, :]].mean(axis=-1)
    return DistortionMeasure(mat)


def load_config(path):
    """Read a JSON config with ``"pmf"`` and optional ``"distortion"`` keys.

    A missing distortion matrix defaults to Hamming distortion.
    """
    data = json.loads(Path(path).read_text())
    return source_and_measure(data)


def source_and_measure(data):
    source = Source(data["pmf"])
    if "distortion" in data and data["distortion"] is not None:
        measure = DistortionMeasure(data["distortion"])
    else:
        measure = DistortionMeasure.hamming(source.alphabet_size)
    if measure.source_alphabet_size != source.alphabet_size:
        raise ValueError("distortion rows must match the source alphabet")
    return source, measure
