"""
Random binning code with a one-time-padded within-bin index.

The codebook holds ``num_bins * bin_size`` i.i.d. source sequences. Bin
``j_p`` is the contiguous index range ``[j_p * bin_size, (j_p + 1) * bin_size)``.
The sender finds a strongly typical codeword equal to the source block,
publishes its bin index in the clear and pads the within-bin index with the
key by addition modulo ``bin_size``.
"""

import hashlib
import math
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .source import (
    CapExceeded,
    Source,
    all_sequences,
    compositions,
    enumerate_distortion_levels,
    entropy,
    make_rng,
    sequence_probabilities,
    typical_mask,
    typical_set_size,
)

MAX_CODEBOOK_SYMBOLS = 1 << 28
EXHAUSTIVE_AUDIT_N = 14


def _floor_pow2(x):
    # guards against 2**(n*R) landing a hair below an integer
    return int(math.floor(2.0**x + 1e-9))


@dataclass(frozen=True, eq=False)
class Codebook:
    n: int
    R: float
    R_K: float
    pmf: np.ndarray
    num_bins: int
    bin_size: int
    codewords: np.ndarray = field(repr=False)
    seed: int = None

    @property
    def num_codewords(self):
        return self.num_bins * self.bin_size

    @property
    def nominal_codewords(self):
        return _floor_pow2(self.n * self.R)

    @property
    def source(self):
        return Source(self.pmf)

    @property
    def effective_rate(self):
        return math.log2(self.num_codewords) / self.n

    @property
    def effective_key_rate(self):
        return math.log2(self.bin_size) / self.n

    @property
    def rate_loss(self):
        """Bits per symbol lost to flooring the bin count and bin size."""
        return self.R - self.effective_rate

    def index(self, j_p, j_s):
        return j_p * self.bin_size + j_s

    def split(self, j):
        return divmod(int(j), self.bin_size)

    def codeword(self, j_p, j_s):
        return self.codewords[self.index(j_p, j_s)]

    def bin(self, j_p):
        return self.codewords[j_p * self.bin_size : (j_p + 1) * self.bin_size]

    @cached_property
    def _lookup(self):
        table = {}
        for j, key in enumerate(map(bytes, self.codewords)):
            table.setdefault(key, []).append(j)
        return {k: np.array(v, dtype=np.int64) for k, v in table.items()}

    def matches(self, s_block):
        """All indices ``j`` with ``codeword[j] == s_block``."""
        key = bytes(np.asarray(s_block, dtype=np.uint8))
        return self._lookup.get(key, np.empty(0, dtype=np.int64))

    def phi(self, s_block):
        return self.matches(s_block).size

    @classmethod
    def from_codewords(cls, codewords, R_K_bits, pmf, R=None, seed=None):
        """Wrap an explicit codeword array; ``R_K_bits`` is ``log2(bin_size)``.

        Handy for hand-built fixtures; the rates are taken as exact.
        """
        cw = np.asarray(codewords, dtype=np.uint8)
        total, n = cw.shape
        bin_size = 1 << int(R_K_bits)
        if total % bin_size:
            raise ValueError("codeword count must be a multiple of the bin size")
        R = math.log2(total) / n if R is None else R
        return cls(n, R, R_K_bits / n, np.asarray(pmf, float), total // bin_size, bin_size, cw, seed)


@dataclass(frozen=True)
class CipherMessage:
    j_p: int
    m_s: int


@dataclass(frozen=True)
class EncodeOutcome:
    message: CipherMessage
    success: bool
    index: int


def code_sizes(n, R, R_K):
    """``(num_bins, bin_size)`` with floors taken separately."""
    if not R >= R_K >= 0:
        raise ValueError("need R >= R_K >= 0")
    return _floor_pow2(n * (R - R_K)), _floor_pow2(n * R_K)


def generate_codebook(source, n, R, R_K, seed, max_symbols=MAX_CODEBOOK_SYMBOLS):
    """Draw ``num_bins * bin_size`` codewords i.i.d. from ``source``, deterministically in ``seed``."""
    num_bins, bin_size = code_sizes(n, R, R_K)
    total = num_bins * bin_size
    if total * n > max_symbols:
        raise CapExceeded(f"codebook of {total} x {n} symbols exceeds cap {max_symbols}")
    if source.alphabet_size > 256:
        raise ValueError("codebook symbols are stored as bytes")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(source.pmf)
    cdf[-1] = 1.0
    cw = np.searchsorted(cdf, rng.random((total, n)), side="right").astype(np.uint8)
    cw.setflags(write=False)
    return Codebook(n, float(R), float(R_K), source.pmf.copy(), num_bins, bin_size, cw, seed)


def pad(j_s, key, bin_size):
    return (j_s + key) % bin_size


def unpad(m_s, key, bin_size):
    return (m_s - key) % bin_size


def encode(s_block, key, cb, delta, seed=None):
    """Encode one block with a key in ``[0, bin_size)``.

    Among all codewords equal to a strongly typical ``s_block`` one is
    chosen uniformly; without one the full index is drawn uniformly and the
    outcome is flagged ``success=False``.
    """
    if not 0 <= key < cb.bin_size:
        raise ValueError(f"key {key} outside [0, {cb.bin_size})")
    rng = make_rng(seed)
    s_block = np.asarray(s_block)
    hits = cb.matches(s_block) if typical_mask(s_block, cb.source, delta)[0] else ()
    if len(hits):
        j = int(hits[rng.integers(len(hits))])
        success = True
    else:
        j = int(rng.integers(cb.num_codewords))
        success = False
    j_p, j_s = cb.split(j)
    return EncodeOutcome(CipherMessage(j_p, pad(j_s, key, cb.bin_size)), success, j)


def decode(msg, key, cb):
    return cb.codeword(msg.j_p, unpad(msg.m_s, key, cb.bin_size)).copy()


def bin_posteriors(cb, delta, cap=1 << 16):
    """Exact joint law of ``(S^n, J_p, Q)`` induced by the encoder.

    Returns ``(seqs, joint)`` where ``joint[q, b, i]`` is
    ``P[S^n = seqs[i], J_p = b, Q = q]``. With a uniform key the padded index
    is uniform and independent of everything else, so the posterior given
    ``M = (b, m_s)`` depends on ``b`` only.
    """
    src = cb.source
    seqs = all_sequences(src.alphabet_size, cb.n, cap)
    probs = sequence_probabilities(src, seqs)
    typ = typical_mask(seqs, src, delta)
    joint = np.zeros((2, cb.num_bins, len(seqs)))
    for i, s in enumerate(seqs):
        if probs[i] == 0:
            continue
        hits = cb.matches(s) if typ[i] else ()
        if len(hits):
            bins = np.bincount(hits // cb.bin_size, minlength=cb.num_bins)
            joint[1, :, i] = probs[i] * bins / len(hits)
        else:
            joint[0, :, i] = probs[i] / cb.num_bins
    return seqs, joint


def equivocation(cb, delta):
    """``H(S^n | M) / n`` in bits per symbol, by exact enumeration."""
    _, joint = bin_posteriors(cb, delta)
    pb = joint.sum(axis=0)
    total = pb.sum(axis=1)
    h = 0.0
    for b in np.flatnonzero(total > 0):
        post = pb[b] / total[b]
        h += total[b] * entropy(post)
    return h / cb.n


@dataclass(frozen=True, eq=False)
class AuditReport:
    levels: np.ndarray
    max_eta: np.ndarray
    eta_thresholds: np.ndarray
    gamma_counts: np.ndarray
    min_gamma: int
    gamma_threshold: float
    max_phi: int
    min_phi: int
    phi_upper: float
    phi_lower: float
    typical_set_size: int
    A2: bool
    A3: bool
    A4: bool
    delta: float
    eps: float
    sampled: bool
    z_count: int

    @property
    def all_events(self):
        return self.A2 and self.A3 and self.A4


def _distortion_matrix(z, cws, measure):
    """Block distortion between every row of ``z`` and every row of ``cws``.

    Computed as a one-hot matrix product so arbitrary measures cost one GEMM.
    """
    n = z.shape[1]
    kz = measure.recon_alphabet_size
    zoh = np.zeros((len(z), n * kz))
    zoh[np.arange(len(z))[:, None], np.arange(n) * kz + z] = 1.0
    # weight[c, i*kz + v] = d(c_i, v)
    weight = measure.matrix[cws].reshape(len(cws), n * kz)
    return zoh @ weight.T / n


def _stratified_sequences(k, n, count, rng):
    """Random sequences whose type is uniform over all types, arranged uniformly."""
    types = compositions(n, k)
    pick = types[rng.integers(len(types), size=count)]
    out = np.empty((count, n), dtype=np.int64)
    for i, c in enumerate(pick):
        out[i] = rng.permutation(np.repeat(np.arange(k), c))
    return out


def _level_index(z, cws, measure, levels):
    """Index of the smallest level ``>= d(cw, z)``; ``levels.size`` when above them all."""
    n = z.shape[1]
    m = measure.matrix
    if np.array_equal(m, np.rint(m)):
        # integer sums index a lookup table instead of a float search
        sums = np.rint(_distortion_matrix(z, cws, measure) * n).astype(np.int64)
        lut = np.searchsorted(levels, np.arange(int(m.max()) * n + 1) / n - 1e-9)
        return lut[sums]
    return np.searchsorted(levels, _distortion_matrix(z, cws, measure) - 1e-9)


def audit(cb, measure, delta, eps, curve, levels=None, exhaustive_n=EXHAUSTIVE_AUDIT_N,
          n_samples=2048, seed=0, chunk=256):
    """Evaluate the codebook counting functions and the events A2-A4.

    ``eta`` counts, per bin and reconstruction ``z``, the typical codewords
    within distortion ``D``; ``gamma`` counts typical codewords per bin and
    ``phi`` counts codebook copies of each typical sequence. Thresholds use
    the effective rates ``log2(bin_size)/n`` and ``log2(num_codewords)/n``.

    For ``n > exhaustive_n`` the maximum over ``z`` is taken over every
    distinct typical codeword plus ``n_samples`` type-stratified random
    sequences, and the report is
    flagged ``sampled=True`` (the resulting A2 is optimistic).
    """
    n = cb.n
    src = cb.source
    if levels is None:
        levels = enumerate_distortion_levels(measure, n)
    levels = np.asarray(levels, dtype=float)
    rk = cb.effective_key_rate
    rate = cb.effective_rate
    H = entropy(src)

    typ = typical_mask(cb.codewords, src, delta)
    gamma_counts = np.bincount(np.flatnonzero(typ) // cb.bin_size, minlength=cb.num_bins)
    min_gamma = int(gamma_counts.min())
    gamma_threshold = (1 - eps) * 2.0 ** (n * rk)

    # phi over the typical set
    T = typical_set_size(src, n, delta)
    typ_keys = [bytes(c) for c in cb.codewords[typ]]
    _, copies = np.unique(np.array(typ_keys, dtype=object), return_counts=True) if typ_keys else (None, np.empty(0, int))
    max_phi = int(copies.max()) if copies.size else 0
    min_phi = int(copies.min()) if copies.size == T and T > 0 else 0
    phi_upper = 2.0 ** (n * (rate - H + eps))
    phi_lower = 2.0 ** (n * (rate - H - eps))
    # an empty typical set makes A4 vacuously true
    A4 = T == 0 or (max_phi <= phi_upper and min_phi >= phi_lower)

    rd = np.asarray(curve.rate_at(levels))
    eta_thresholds = 2.0 ** (n * (np.maximum(rk - rd, 0.0) + eps))

    typ_idx = np.flatnonzero(typ)
    max_eta = np.zeros(levels.size, dtype=np.int64)
    kz = measure.recon_alphabet_size
    sampled = n > exhaustive_n
    if typ_idx.size:
        cws = cb.codewords[typ_idx].astype(np.int64)
        bins = typ_idx // cb.bin_size
        if not sampled:
            z_all = all_sequences(kz, n, cap=1 << 24)
        else:
            rng = np.random.default_rng(seed)
            z_all = np.unique(np.concatenate([cws, _stratified_sequences(kz, n, n_samples, rng)]), axis=0)
        nl = levels.size + 1  # last slot collects distortions above every level
        for start in range(0, len(z_all), chunk):
            z = z_all[start : start + chunk]
            lvl = _level_index(z, cws, measure, levels)
            flat = (np.arange(len(z))[:, None] * cb.num_bins + bins[None, :]) * nl + lvl
            hist = np.bincount(flat.ravel(), minlength=len(z) * cb.num_bins * nl)
            hist = hist.reshape(len(z) * cb.num_bins, nl)[:, :-1].cumsum(axis=1)
            max_eta = np.maximum(max_eta, hist.max(axis=0))
        z_count = len(z_all)
    else:
        z_count = 0
    A2 = bool(np.all(max_eta <= eta_thresholds))
    A3 = bool(min_gamma >= gamma_threshold)
    return AuditReport(levels, max_eta, eta_thresholds, gamma_counts, min_gamma, gamma_threshold,
                       max_phi, min_phi, phi_upper, phi_lower, T, A2, A3, bool(A4),
                       float(delta), float(eps), sampled, z_count)


_MAGIC = b"SCCB"
_HEADER = struct.Struct("<4sHIddqIIQ")


def save_codebook(cb, path):
    """Write the codebook as a small header, the pmf, then one byte per symbol."""
    seed = -1 if cb.seed is None else int(cb.seed)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, 1, cb.n, cb.R, cb.R_K, seed, cb.num_bins, cb.bin_size, cb.pmf.size))
        fh.write(np.asarray(cb.pmf, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(cb.codewords, dtype=np.uint8).tobytes())


def load_codebook(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size or raw[:4] != _MAGIC:
        raise ValueError(f"{path} is not a codebook file")
    magic, version, n, R, R_K, seed, num_bins, bin_size, k = _HEADER.unpack_from(raw)
    if version != 1 or len(raw) != _HEADER.size + 8 * k + num_bins * bin_size * n:
        raise ValueError(f"{path}: unsupported version or truncated payload")
    off = _HEADER.size
    pmf = np.frombuffer(raw, dtype="<f8", count=k, offset=off).astype(float)
    off += 8 * k
    cw = np.frombuffer(raw, dtype=np.uint8, count=num_bins * bin_size * n, offset=off)
    cw = cw.reshape(num_bins * bin_size, n).copy()
    cw.setflags(write=False)
    return Codebook(n, R, R_K, pmf, num_bins, bin_size, cw, None if seed < 0 else seed)


def codebook_digest(cb):
    return hashlib.sha256(np.ascontiguousarray(cb.codewords).tobytes()).hexdigest()
