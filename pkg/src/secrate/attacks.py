"""
Henchman strategies against the binning cipher.

The henchman sees the source superblock and the public messages (never the
key) and sends the wiretapper a bit string; the wiretapper reconstructs.
Rates are counted in whole bits and reported per source symbol.
"""

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaln

from .codec import bin_posteriors, encode
from .ratedist import d_max, rd_at_distortion
from .source import (
    CapExceeded,
    DistortionMeasure,
    Source,
    all_sequences,
    compositions,
    make_rng,
    sample_iid,
)

EXPLICIT_COVER_CAP = 1 << 16
JOINT_TYPE_CAP = 2_000_000


class InsufficientBudget(ValueError):
    """The rate budget cannot pay for the requested strategy."""


@dataclass(frozen=True, eq=False)
class SuperblockObservation:
    """What the henchman sees: ``l`` source blocks, their messages and the codebook.

    ``successes`` records the encoder's success flag per block for reporting;
    no strategy reads the keys.
    """

    codebook: object
    source_blocks: np.ndarray
    messages: tuple
    successes: np.ndarray

    def __post_init__(self):
        blocks = np.asarray(self.source_blocks, dtype=np.int64)
        if blocks.ndim != 2 or blocks.shape[1] != self.codebook.n:
            raise ValueError("source_blocks must have shape (l, n)")
        if len(self.messages) != blocks.shape[0] or len(self.successes) != blocks.shape[0]:
            raise ValueError("one message and success flag per block")
        object.__setattr__(self, "source_blocks", blocks)
        object.__setattr__(self, "successes", np.asarray(self.successes, dtype=bool))

    @property
    def l(self):
        return self.source_blocks.shape[0]

    @property
    def n(self):
        return self.codebook.n


@dataclass(frozen=True, eq=False)
class AttackResult:
    strategy: str
    bits: int
    rate_spent: float
    reconstruction: np.ndarray
    block_distortions: np.ndarray
    distortion: float
    D_E: float
    success: bool
    budget: float = math.nan


def observe(cb, l, delta, seed=None):
    """Draw ``l`` source blocks and fresh uniform keys, and encode each block."""
    rng = make_rng(seed)
    src = cb.source
    blocks = sample_iid(src, l * cb.n, rng).reshape(l, cb.n)
    keys = rng.integers(cb.bin_size, size=l)
    outs = [encode(b, int(k), cb, delta, rng) for b, k in zip(blocks, keys)]
    return SuperblockObservation(cb, blocks, tuple(o.message for o in outs), [o.success for o in outs])


def _result(strategy, bits, obs_blocks, z_blocks, measure, D_E, budget):
    per_block = measure.matrix[obs_blocks, z_blocks].mean(axis=1)
    dist = float(per_block.mean())
    return AttackResult(strategy, int(bits), bits / obs_blocks.size, z_blocks, per_block, dist,
                        float(D_E), bool(dist <= D_E + 1e-12), budget)


def _key_index_blocks(obs, idx, measure):
    cb = obs.codebook
    z = np.empty((len(idx), cb.n), dtype=np.int64)
    for r, i in enumerate(idx):
        cws = cb.bin(obs.messages[i].j_p).astype(np.int64)
        d = measure.matrix[obs.source_blocks[i], cws].sum(axis=1)
        z[r] = cws[int(np.argmin(d))]
    return z


def key_index_bits(cb):
    return math.ceil(math.log2(cb.bin_size)) if cb.bin_size > 1 else 0


def key_index_attack(obs, measure, D_E=0.0):
    """Send, per block, the within-bin index of the bin codeword closest to the source.

    On an encoded block the closest codeword is the source itself, so the
    wiretapper decodes exactly. On a failed block the bin is random and the
    residual distortion is counted as is.
    """
    bits = key_index_bits(obs.codebook) * obs.l
    z = _key_index_blocks(obs, range(obs.l), measure)
    return _result("key-index", bits, obs.source_blocks, z, measure, D_E, math.nan)


@lru_cache(maxsize=256)
def _cover_marginal(pmf_key, mat_key, shape, D):
    source = Source(np.frombuffer(pmf_key))
    measure = DistortionMeasure(np.frombuffer(mat_key).reshape(shape))
    q = rd_at_distortion(source, measure, D).output_marginal(source.pmf)
    q = np.clip(q, 0.0, None)
    return q / q.sum()


def cover_marginal(source, measure, D):
    """Output marginal of the rate-distortion test channel at distortion ``D``."""
    m = np.ascontiguousarray(measure.matrix, dtype=float)
    return _cover_marginal(np.ascontiguousarray(source.pmf, float).tobytes(), m.tobytes(), m.shape, float(D))


def _explicit_cover(s, q, dmat, N, rng, chunk_symbols=1 << 22):
    L = s.size
    cdf = np.cumsum(q)
    cdf[-1] = 1.0
    best_d, best_z = math.inf, None
    rows = max(1, chunk_symbols // L)
    for start in range(0, N, rows):
        m = min(rows, N - start)
        zs = np.searchsorted(cdf, rng.random((m, L)), side="right")
        d = dmat[s, zs].sum(axis=1)
        i = int(np.argmin(d))
        if d[i] < best_d:
            best_d, best_z = float(d[i]), zs[i]
    return best_z


def _joint_types(s, q, dmat, cap=JOINT_TYPE_CAP):
    """Per-source-symbol compositions of a random word, with log-probabilities and distortions."""
    ks, kz = dmat.shape
    groups = [np.flatnonzero(s == a) for a in range(ks)]
    with np.errstate(divide="ignore"):
        logq = np.log(q)
    tables = []
    total = 1
    for a, g in enumerate(groups):
        if g.size == 0:
            continue
        c = compositions(g.size, kz)
        total *= len(c)
        if total > cap:
            raise CapExceeded(f"more than {cap} joint types")
        lp = gammaln(g.size + 1) - gammaln(c + 1).sum(axis=1) + np.where(c > 0, c * logq, 0.0).sum(axis=1)
        keep = np.isfinite(lp)
        tables.append((a, g, c[keep], lp[keep], c[keep] @ dmat[a]))
    return tables


def _order_statistic_cover(s, q, dmat, N, rng):
    """Best of ``N`` i.i.d. words drawn from ``q``, sampled without drawing the words.

    The block distortion of a random word depends only on its joint type
    with ``s``. The minimum over ``N`` words has CDF ``1 - (1 - F)^N``, so we
    draw the minimum distortion by inversion, then a joint type at that
    distortion in proportion to its probability, then a uniformly random
    arrangement consistent with it.
    """
    tables = _joint_types(s, q, dmat)
    logp = np.zeros(1)
    dist = np.zeros(1)
    index = np.zeros((1, 0), dtype=np.int64)
    for _, _, c, lp, d in tables:
        logp = (logp[:, None] + lp[None, :]).ravel()
        dist = (dist[:, None] + d[None, :]).ravel()
        index = np.concatenate([np.repeat(index, len(lp), axis=0),
                                np.tile(np.arange(len(lp)), len(index))[:, None]], axis=1)
    # group equal distortions (sums of matrix entries) after rounding
    key = np.round(dist, 9)
    levels, inv = np.unique(key, return_inverse=True)
    level_logp = np.full(levels.size, -np.inf)
    np.logaddexp.at(level_logp, inv, logp)
    # log P[X > x]: from the lower tail via log1p(-F) while F is small (a sum
    # from the top cannot resolve 1 - 1e-20), from the upper tail otherwise
    log_cdf = np.logaddexp.accumulate(level_logp)
    upper = np.append(np.logaddexp.accumulate(level_logp[::-1])[::-1][1:], -np.inf)
    with np.errstate(divide="ignore"):
        lower = np.log1p(-np.exp(np.minimum(log_cdf, 0.0)))
    log_surv = np.minimum(np.where(log_cdf < math.log(0.5), lower, upper), 0.0)
    G = -np.expm1(N * log_surv)  # P[min <= level]
    u = rng.random()
    lv = min(int(np.searchsorted(G, u, side="left")), levels.size - 1)
    cand = np.flatnonzero(inv == lv)
    w = np.exp(logp[cand] - logp[cand].max())
    pick = cand[rng.choice(cand.size, p=w / w.sum())]
    z = np.empty(s.size, dtype=np.int64)
    for col, (_, g, c, _, _) in enumerate(tables):
        counts = c[index[pick, col]]
        symbols = np.repeat(np.arange(dmat.shape[1]), counts)
        z[g] = rng.permutation(symbols)
    return z


def cover(s, q, measure, bits, rng, explicit_cap=EXPLICIT_COVER_CAP):
    """Best word among ``2**bits`` i.i.d. draws from ``q`` for the flat sequence ``s``."""
    s = np.asarray(s, dtype=np.int64).ravel()
    dmat = measure.matrix
    N = 2**bits
    if N <= explicit_cap:
        return _explicit_cover(s, q, dmat, N, rng)
    return _order_statistic_cover(s, q, dmat, float(N), rng)


def _cover_blocks(obs, idx, measure, D_target, bits, rng, explicit_cap):
    blocks = obs.source_blocks[list(idx)]
    src = obs.codebook.source
    if D_target >= d_max(src, measure):
        z0 = int(np.argmin(src.pmf @ measure.matrix))
        return np.full(blocks.shape, z0, dtype=np.int64), 0
    q = cover_marginal(src, measure, D_target)
    z = cover(blocks.ravel(), q, measure, bits, rng, explicit_cap)
    return z.reshape(blocks.shape), bits


def _budget_bits(symbols, rate):
    return int(math.floor(symbols * rate + 1e-9))


def rd_attack(obs, measure, D_target, rate_budget, seed=None, explicit_cap=EXPLICIT_COVER_CAP):
    """Ignore the messages and cover the whole superblock with a random code.

    The code has ``2**floor(n * l * rate_budget)`` words drawn i.i.d. from
    the test-channel output marginal at ``D_target``; the henchman sends
    the index of the closest one. With ``D_target >= d_max`` a single
    constant word suffices and no bits are sent.
    """
    rng = make_rng(seed)
    bits = _budget_bits(obs.source_blocks.size, rate_budget)
    z, used = _cover_blocks(obs, range(obs.l), measure, D_target, bits, rng, explicit_cap)
    return _result("rd", used, obs.source_blocks, z, measure, D_target, rate_budget)


def timesharing_attack(obs, measure, lam, D, rate_budget, seed=None, D_E=None,
                       explicit_cap=EXPLICIT_COVER_CAP):
    """Key-index the first ``ceil((1 - lam) * l)`` blocks, cover the rest at distortion ``D``.

    Bits left after the key-index part all go to the covering code.
    Success is judged against ``D_E`` (default ``lam * D``).
    """
    if not 0 <= lam <= 1:
        raise ValueError("lam must lie in [0, 1]")
    rng = make_rng(seed)
    D_E = lam * D if D_E is None else D_E
    l, n = obs.l, obs.n
    k = min(l, math.ceil((1 - lam) * l - 1e-9))
    total = _budget_bits(l * n, rate_budget)
    key_bits = key_index_bits(obs.codebook) * k
    if key_bits > total:
        raise InsufficientBudget(f"key-index part needs {key_bits} bits, budget is {total}")
    z = np.empty_like(obs.source_blocks)
    z[:k] = _key_index_blocks(obs, range(k), measure)
    used = key_bits
    if k < l:
        z[k:], cover_bits = _cover_blocks(obs, range(k, l), measure, D, total - key_bits, rng, explicit_cap)
        used += cover_bits
    return _result("timesharing", used, obs.source_blocks, z, measure, D_E, rate_budget)


@dataclass(frozen=True)
class ListCover:
    bits: float
    list_size: int
    centers: tuple
    covered_mass: float
    greedy: bool


def brute_force_min_rate(cb, m, D_E, coverage, delta, measure=None, given_success=True,
                         exact_max=4, cap=1 << 12):
    """Smallest list of reconstructions covering ``coverage`` of the wiretapper's posterior.

    The posterior over ``S^n`` given the message ``m`` is computed exactly
    for the implemented encoder; with ``given_success`` it is further
    conditioned on a successful encoding. A candidate is covered when some
    list element is within ``D_E`` of it. Lists of up to ``exact_max``
    elements are searched exhaustively, larger ones greedily (flagged).
    Returns ``log2`` of the list size in bits.
    """
    measure = measure or DistortionMeasure.hamming(cb.source.alphabet_size)
    seqs, joint = bin_posteriors(cb, delta, cap=cap)
    post = joint[1, m.j_p] if given_success else joint[:, m.j_p].sum(axis=0)
    if post.sum() <= 0:
        raise ValueError("message has zero probability under the chosen conditioning")
    post = post / post.sum()
    support = np.flatnonzero(post > 0)
    mass = post[support]
    zs = all_sequences(measure.recon_alphabet_size, cb.n, cap)
    d = measure.matrix[seqs[support][None, :, :], zs[:, None, :]].mean(axis=2)
    covers = d <= D_E + 1e-12
    # keep one z per distinct cover set, and drop empty ones
    _, first = np.unique(np.packbits(covers, axis=1), axis=0, return_index=True)
    first = np.sort(first)
    covers_u, zs_u = covers[first], zs[first]
    nonempty = covers_u.any(axis=1)
    covers_u, zs_u = covers_u[nonempty], zs_u[nonempty]
    target = coverage - 1e-12

    for k in range(1, min(exact_max, len(covers_u)) + 1):
        best, best_set = -1.0, None
        for combo in itertools.combinations(range(len(covers_u)), k):
            got = float(mass[np.any(covers_u[list(combo)], axis=0)].sum())
            if got > best:
                best, best_set = got, combo
        if best >= target:
            return ListCover(math.log2(k), k, tuple(map(tuple, zs_u[list(best_set)])), best, False)

    chosen, covered = [], np.zeros(support.size, dtype=bool)
    while float(mass[covered].sum()) < target:
        gains = (covers_u & ~covered).astype(float) @ mass
        i = int(np.argmax(gains))
        if gains[i] <= 0:
            raise ValueError("coverage target unreachable")
        chosen.append(i)
        covered |= covers_u[i]
    k = len(chosen)
    return ListCover(math.log2(k), k, tuple(map(tuple, zs_u[chosen])), float(mass[covered].sum()), True)
