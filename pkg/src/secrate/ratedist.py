"""
Rate-distortion functions of discrete memoryless sources.

The solver works in Lagrangian form: for a slope ``beta >= 0`` (bits per
unit distortion, i.e. ``beta = -dR/dD``) it minimises ``I(S;V) + beta E d``
by Blahut-Arimoto alternating minimisation. Sweeping or bisecting the slope
traces out the convex curve ``R(D)``.
"""

import csv
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .source import CapExceeded, DistortionMeasure, Source, entropy

LN2 = math.log(2.0)


class ConvergenceError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e} bits)")
        self.residual = residual


DEFAULT_SLOPES = tuple(2.0 ** (k / 2) for k in range(-8, 13))


@dataclass(frozen=True)
class BASolverConfig:
    tolerance: float = 1e-9
    max_iterations: int = 10000
    slope_grid: tuple = DEFAULT_SLOPES

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True, eq=False)
class RDPoint:
    """One point of a rate-distortion curve with its test channel ``p(v|s)``.

    ``slope`` is ``-dR/dD`` in bits per unit distortion (``inf`` at the
    zero-distortion end). ``gap`` bounds ``rate - R(distortion)`` in bits.
    """

    distortion: float
    rate: float
    test_channel: np.ndarray
    slope: float = math.nan
    gap: float = 0.0
    iterations: int = 0

    def output_marginal(self, pmf):
        return np.asarray(pmf) @ self.test_channel


def binary_entropy(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -x * np.log2(x) - (1 - x) * np.log2(1 - x)
    return np.where((x <= 0) | (x >= 1), 0.0, h)


def binary_hamming_rd(p, D):
    """Closed-form ``R(D) = h(p) - h(D)`` for a Bern(p) source under Hamming distortion."""
    p = min(p, 1.0 - p)
    if D >= p:
        return 0.0
    return float(binary_entropy(p) - binary_entropy(max(D, 0.0)))


def d_max(source, measure):
    """Smallest distortion reachable at zero rate (best constant guess)."""
    return float(np.min(source.pmf @ measure.matrix))


def d_min(source, measure):
    """Smallest achievable expected distortion (any rate)."""
    return float(source.pmf @ measure.matrix.min(axis=1))


def _mutual_information(p, W):
    r = p @ W
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(W > 0, W * np.log2(W / r[None, :]), 0.0)
    return float(max(p @ terms.sum(axis=1), 0.0))


def _solve(pmf, dmat, beta, tol, max_iter, q0=None):
    """Core iteration; returns ``(D, R, W, q, gap, iterations)`` without raising."""
    full_k = pmf.size
    supp = pmf > 0
    p = pmf[supp]
    d = dmat[supp]
    nz = dmat.shape[1]

    if beta == 0:
        W = np.zeros((full_k, nz))
        W[:, int(np.argmin(pmf @ dmat))] = 1.0
        q = W[0].copy()
        return float(np.min(pmf @ dmat)), 0.0, W, q, 0.0, 0

    diff = d - d.min(axis=1, keepdims=True)
    if math.isinf(beta):
        A = (diff <= 1e-15).astype(float)
    else:
        A = np.exp2(-beta * diff)

    if q0 is None:
        q = np.full(nz, 1.0 / nz)
    else:
        q = np.maximum(np.asarray(q0, dtype=float), 1e-12)
        q /= q.sum()

    # F(q) = -sum p log2 alpha upper-bounds the Lagrangian optimum; convexity of F
    # gives the lower bound F(q) - (max c - 1)/ln2, so the gap needs only c
    it = 0
    while True:
        alpha = np.maximum(A @ q, 1e-300)
        c = (p / alpha) @ A
        gap = (float(c.max()) - 1.0) / LN2
        if gap < tol or it >= max_iter:
            break
        q = q * c
        q /= q.sum()
        it += 1

    W = A * q[None, :] / alpha[:, None]
    info = _mutual_information(p, W)
    W_full = np.zeros((full_k, nz))
    W_full[supp] = W
    # rows of zero-probability symbols are irrelevant; give them the output marginal
    W_full[~supp] = p @ W
    D = float(p @ (W * d).sum(axis=1))
    return D, info, W_full, q, max(gap, 0.0), it


def blahut_arimoto(source, measure, slope, config=None, q0=None):
    """Solve ``min I(S;V) + slope * E d(S,V)`` for one slope ``>= 0``.

    ``slope = 0`` returns the zero-rate point at ``d_max``; ``slope = inf``
    returns the minimum-distortion end of the curve (``R(0) = H(S)`` for
    Hamming distortion).

    Raises
    ------
    ConvergenceError
        When the duality gap is still above ``config.tolerance`` after
        ``config.max_iterations`` iterations.
    """
    cfg = config or BASolverConfig()
    if slope < 0:
        raise ValueError("slope must be >= 0 (it is -dR/dD)")
    D, R, W, _, gap, it = _solve(source.pmf, measure.matrix, slope, cfg.tolerance, cfg.max_iterations, q0)
    if gap >= cfg.tolerance:
        raise ConvergenceError(f"Blahut-Arimoto did not converge at slope {slope}", gap)
    return RDPoint(D, R, W, slope, gap, it)


class _Parts:
    """Weighted family of sources sharing one Lagrange slope (water-filling)."""

    def __init__(self, parts, cfg):
        self.parts = [(w, np.asarray(p, float), np.asarray(d, float)) for w, p, d in parts if w > 0]
        self.cfg = cfg
        self.warm = [None] * len(self.parts)
        self.max_gap = 0.0

    def d_low(self):
        return sum(w * float(p @ d.min(axis=1)) for w, p, d in self.parts)

    def d_high(self):
        return sum(w * float(np.min(p @ d)) for w, p, d in self.parts)

    def at(self, beta):
        D = R = gap = 0.0
        chans = []
        for i, (w, p, d) in enumerate(self.parts):
            Di, Ri, Wi, qi, gi, _ = _solve(p, d, beta, self.cfg.tolerance, self.cfg.max_iterations, self.warm[i])
            if 0 < beta < math.inf:
                self.warm[i] = qi
            D += w * Di
            R += w * Ri
            gap += w * gi
            chans.append(Wi)
        self.max_gap = max(self.max_gap, gap)
        return D, R, chans, gap


def _at_distortion(parts, D):
    """Bisect the common slope so the weighted distortion equals ``D``.

    Returns ``(rate, channels, slope, gap)``. Between the two bracketing
    slopes the curve is interpolated linearly, which is exact across the
    straight segments where ``D(slope)`` jumps.
    """
    lo_D = parts.d_low()
    hi_D = parts.d_high()
    if D >= hi_D - 1e-15:
        _, R, ch, g = parts.at(0.0)
        return R, ch, 0.0, g
    if D < lo_D - 1e-12:
        raise ValueError(f"distortion {D} is below the minimum achievable {lo_D}")
    if D <= lo_D + 1e-15:
        _, R, ch, g = parts.at(math.inf)
        return R, ch, math.inf, g

    b_hi = 1.0
    D_hi, R_hi, ch_hi, g_hi = parts.at(b_hi)
    while D_hi > D and b_hi < 2.0**40:
        b_hi *= 2.0
        D_hi, R_hi, ch_hi, g_hi = parts.at(b_hi)
    if D_hi > D:
        b_hi = math.inf
        D_hi, R_hi, ch_hi, g_hi = parts.at(b_hi)

    b_lo = b_hi / 2.0 if math.isfinite(b_hi) else 2.0**40
    D_lo, R_lo, ch_lo, g_lo = parts.at(b_lo)
    while D_lo < D and b_lo > 2.0**-30:
        b_lo /= 2.0
        D_lo, R_lo, ch_lo, g_lo = parts.at(b_lo)
    if D_lo < D:
        b_lo = 0.0
        D_lo, R_lo, ch_lo, g_lo = parts.at(b_lo)

    for _ in range(200):
        if D_lo - D_hi <= 1e-13:
            break
        if b_lo == 0.0:
            mid = b_hi / 2.0
        elif math.isinf(b_hi):
            mid = b_lo * 2.0
        else:
            if b_hi / b_lo < 1.0 + 1e-12:
                break
            mid = math.sqrt(b_lo * b_hi)
        Dm, Rm, chm, gm = parts.at(mid)
        if Dm >= D:
            b_lo, D_lo, R_lo, ch_lo, g_lo = mid, Dm, Rm, chm, gm
        else:
            b_hi, D_hi, R_hi, ch_hi, g_hi = mid, Dm, Rm, chm, gm

    t = 0.0 if D_lo - D_hi <= 0 else (D_lo - D) / (D_lo - D_hi)
    R = (1 - t) * R_lo + t * R_hi
    chans = [(1 - t) * a + t * b for a, b in zip(ch_lo, ch_hi)]
    slope = b_hi if t >= 0.5 else b_lo
    return R, chans, slope, max(g_lo, g_hi)


def rd_at_distortion(source, measure, D, config=None):
    """``R(D)`` via slope bisection over Blahut-Arimoto solves.

    Returns exactly zero rate for ``D >= d_max``. The returned test channel
    is the matching mixture of the two bracketing channels, so its expected
    distortion equals ``D``.
    """
    cfg = config or BASolverConfig()
    if D < 0:
        raise ValueError("D must be >= 0")
    parts = _Parts([(1.0, source.pmf, measure.matrix)], cfg)
    R, chans, slope, gap = _at_distortion(parts, D)
    if gap >= 100 * cfg.tolerance:
        raise ConvergenceError(f"bisection at D={D} ended on an unconverged solve", gap)
    if slope == 0.0:
        D = d_max(source, measure)
    return RDPoint(float(D), float(max(R, 0.0)), chans[0], slope, gap)


@dataclass(frozen=True, eq=False)
class RDCurve:
    """Sampled convex curve, linearly interpolated between samples."""

    points: tuple
    d_max: float
    distortions: np.ndarray = field(init=False, repr=False)
    rates: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = tuple(sorted(self.points, key=lambda p: (p.distortion, -p.rate)))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "distortions", np.array([p.distortion for p in pts]))
        object.__setattr__(self, "rates", np.array([p.rate for p in pts]))

    @property
    def slopes(self):
        return np.array([p.slope for p in self.points])

    def rate_at(self, D):
        D = np.asarray(D, dtype=float)
        out = np.interp(D, self.distortions, self.rates, left=self.rates[0], right=0.0)
        out = np.where(D >= self.d_max, 0.0, out)
        return out if out.ndim else float(out)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["distortion", "rate", "slope"])
            for p in self.points:
                w.writerow([f"{p.distortion:.9g}", f"{p.rate:.9g}", f"{p.slope:.9g}"])


def rd_curve(source, measure, config=None, chord_tol=1e-6, max_gap=0.01, max_solves=4000):
    """Sample ``R(D)`` adaptively in the slope.

    Starts from ``config.slope_grid`` (plus the two endpoints, slope 0 and
    slope inf) and bisects slope intervals geometrically until the chord
    between neighbouring samples is within ``chord_tol`` of the curve and
    no distortion gap exceeds ``max_gap``.
    """
    cfg = config or BASolverConfig()
    pmf, dmat = source.pmf, measure.matrix

    def solve(beta, q0=None):
        D, R, W, q, gap, it = _solve(pmf, dmat, beta, cfg.tolerance, cfg.max_iterations, q0)
        return RDPoint(D, R, W, beta, gap, it)

    slopes = sorted(set([0.0, math.inf, *cfg.slope_grid]))
    pts = {}
    q = None
    for b in slopes:
        pts[b] = solve(b, q)
        if 0 < b < math.inf:
            q = pts[b].output_marginal(pmf)
    queue = deque(zip(slopes[:-1], slopes[1:]))
    solves = len(pts)
    while queue and solves < max_solves:
        b_lo, b_hi = queue.popleft()
        P_lo, P_hi = pts[b_lo], pts[b_hi]
        width = P_lo.distortion - P_hi.distortion
        if width <= 1e-12:
            continue
        if b_lo == 0.0:
            if b_hi < 1e-6:
                continue
            mid = b_hi / 2.0
        elif math.isinf(b_hi):
            if b_lo > 1e4:
                continue
            mid = b_lo * 2.0
        else:
            if b_hi / b_lo < 1.0 + 1e-9:
                continue
            mid = math.sqrt(b_lo * b_hi)
        # endpoint marginals are degenerate and make poor starting points
        inner = [P.output_marginal(pmf) for P in (P_lo, P_hi) if 0 < P.slope < math.inf]
        q0 = np.mean(inner, axis=0) if inner else None
        P = solve(mid, q0)
        solves += 1
        t = (P_lo.distortion - P.distortion) / width
        chord = (1 - t) * P_lo.rate + t * P_hi.rate
        if chord - P.rate > chord_tol or width > max_gap:
            pts[mid] = P
            queue.append((b_lo, mid))
            queue.append((mid, b_hi))
    return RDCurve(tuple(pts.values()), d_max(source, measure))


def conditional_rd(cond_sources, measure_n, D, n=1, config=None, cap=16):
    """Minimum of ``sum_m w_m R_m(D_m)`` subject to ``sum_m w_m D_m <= D``, per symbol.

    ``cond_sources`` is a list of ``(weight, Source)`` pairs, each Source
    living on the super-alphabet of ``measure_n``. All per-``m`` curves are
    solved at a common Lagrange slope, which is the optimal distortion
    allocation because every curve is convex. The result is divided by
    ``n`` to give bits per source symbol.
    """
    cfg = config or BASolverConfig()
    if measure_n.source_alphabet_size > cap:
        raise CapExceeded(f"super-alphabet of size {measure_n.source_alphabet_size} exceeds cap {cap}")
    weights = np.array([w for w, _ in cond_sources], dtype=float)
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1")
    parts = _Parts([(w, s.pmf, measure_n.matrix) for w, s in cond_sources], cfg)
    R, _, _, gap = _at_distortion(parts, D)
    if gap >= 100 * cfg.tolerance:
        raise ConvergenceError(f"conditional solve at D={D} ended on an unconverged solve", gap)
    return max(R, 0.0) / n


def rd_zero(source, measure):
    """``R`` at the minimum achievable distortion; equals ``H(S)`` for Hamming."""
    if measure.is_hamming():
        return entropy(source)
    return blahut_arimoto(source, measure, math.inf).rate
