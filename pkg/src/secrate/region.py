"""
The achievable region of the cipher system with a rate-limited henchman.

The maximum secure henchman rate is

    Gamma(R_K, D_E) = min over lambda in [0, 1], D >= 0 with lambda * D <= D_E
                      of (1 - lambda) * R_K + lambda * R(D),

which is the lower convex envelope of ``D -> min{R_K, R(D)}`` evaluated at
``D_E``. Both readings are computed: the envelope gives the value, and a
refined grid over ``(lambda, D)`` checks it.
"""

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .codec import bin_posteriors
from .ratedist import conditional_rd, rd_curve
from .source import Source, block_measure, entropy

SURFACE_COLUMNS = ("R_K", "D_E", "gamma", "lambda_star", "d_star", "gamma_check")
CROSS_CHECK_TOL = 1e-4


@dataclass(frozen=True)
class RegionPoint:
    R: float
    R_K: float
    R_H: float
    D_E: float

    def __post_init__(self):
        for name in ("R", "R_K", "R_H", "D_E"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class GammaResult:
    value: float
    lambda_star: float
    d_star: float
    check_value: float = math.nan

    @property
    def discrepancy(self):
        return abs(self.value - self.check_value)


@dataclass(frozen=True)
class Achievability:
    achievable: bool
    rate_ok: bool
    henchman_ok: bool
    entropy: float
    gamma: float
    reason: str

    def __bool__(self):
        return self.achievable


def lower_hull(x, y):
    """Vertices of the lower convex hull of points sorted by ``x`` (monotone chain)."""
    order = np.lexsort((y, x))
    hull = []
    for i in order:
        p = (float(x[i]), float(y[i]))
        if hull and p[0] == hull[-1][0]:
            continue
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point unless it lies strictly below the chord
            if (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1) <= 0:
                hull.pop()
            else:
                break
        hull.append(p)
    return np.array(hull)


def _hull_gamma(R_K, D_E, curve):
    dm = curve.d_max
    x = np.concatenate([[0.0], curve.distortions, [dm]])
    y = np.concatenate([[R_K], np.minimum(R_K, curve.rates), [0.0]])
    hull = lower_hull(x, y)
    xe = min(D_E, dm)
    value = float(np.interp(xe, hull[:, 0], hull[:, 1]))
    if value >= R_K - 1e-12:
        return R_K, 0.0, 0.0
    if D_E >= dm:
        return 0.0, 1.0, dm
    # the key point (0, R_K) is a hull vertex only when it undercuts R(0)
    k = int(np.searchsorted(hull[:, 0], xe, side="right"))
    k = min(max(k, 1), len(hull) - 1)
    x_a, y_a = hull[k - 1]
    x_b, _ = hull[k]
    if x_a == 0.0 and y_a == R_K and R_K < curve.rate_at(0.0):
        lam = xe / x_b
        return value, lam, float(x_b)
    return value, 1.0, float(xe)


def _grid_gamma(R_K, D_E, curve, step=0.01, final_step=1e-5):
    """Direct minimisation over ``(lambda, D)`` on a coarse grid, then zooming in.

    For each ``D`` the boundary ``lambda = min(1, D_E / D)`` is added to the
    grid since the optimum of a linear function in ``lambda`` sits there.
    Ties go to the smaller ``lambda``.
    """
    dm = curve.d_max

    def best(lams, ds):
        L, Dg = np.meshgrid(lams, ds, indexing="ij")
        with np.errstate(divide="ignore"):
            edge = np.where(ds > 0, np.minimum(1.0, D_E / np.where(ds > 0, ds, 1.0)), 1.0)
        L = np.concatenate([L, edge[None, :]], axis=0)
        Dg = np.concatenate([Dg, ds[None, :]], axis=0)
        feasible = L * Dg <= D_E + 1e-15
        vals = (1 - L) * R_K + L * np.asarray(curve.rate_at(Dg))
        vals = np.where(feasible, vals, np.inf)
        flat = np.lexsort((L.ravel(), vals.ravel()))[0]
        return vals.ravel()[flat], L.ravel()[flat], Dg.ravel()[flat]

    lams = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    ds = np.append(np.arange(0.0, dm, step), dm)
    v, lam, d = best(lams, ds)
    h = step
    while h > final_step:
        span = 2 * h
        h /= 10
        lams = np.clip(np.arange(lam - span, lam + span + h / 2, h), 0.0, 1.0)
        ds = np.clip(np.arange(d - span, d + span + h / 2, h), 0.0, dm)
        v2, lam2, d2 = best(np.unique(lams), np.unique(ds))
        if v2 <= v:
            v, lam, d = v2, lam2, d2
    return float(v), float(lam), float(d)


def gamma(R_K, D_E, curve):
    """Maximum secure henchman rate ``Gamma(R_K, D_E)`` for a sampled ``R(D)`` curve.

    Parameters
    ----------
    R_K : float
        Key rate in bits per symbol.
    D_E : float
        Wiretapper distortion target.
    curve : RDCurve
        Rate-distortion curve of the source and measure.

    Returns
    -------
    GammaResult
        Envelope value with its optimal ``(lambda, D)`` and the grid
        cross-check value. A disagreement beyond 1e-4 emits a warning.
    """
    if not (R_K >= 0 and D_E >= 0):
        raise ValueError("R_K and D_E must be >= 0")
    if R_K == 0:
        return GammaResult(0.0, 0.0, 0.0, 0.0)
    _, lam, d = _hull_gamma(R_K, D_E, curve)
    value = (1 - lam) * R_K + lam * float(curve.rate_at(d))
    check, _, _ = _grid_gamma(R_K, D_E, curve)
    if abs(check - value) > CROSS_CHECK_TOL:
        warnings.warn(f"Gamma({R_K}, {D_E}): envelope {value:.6g} vs grid {check:.6g}", RuntimeWarning)
    return GammaResult(float(value), float(lam), float(d), check)


def is_achievable(pt, source, measure, curve=None):
    """Membership test: ``R >= H(S)`` and ``R_H <= Gamma(R_K, D_E)``, each with 1e-9 slack."""
    curve = curve or rd_curve(source, measure)
    H = entropy(source)
    g = gamma(pt.R_K, pt.D_E, curve).value
    rate_ok = pt.R >= H - 1e-9
    hench_ok = pt.R_H <= g + 1e-9
    reasons = []
    if not rate_ok:
        reasons.append(f"R={pt.R:g} < H(S)={H:.6g}")
    if not hench_ok:
        reasons.append(f"R_H={pt.R_H:g} > Gamma={g:.6g}")
    reason = "; ".join(reasons) if reasons else f"R >= H(S)={H:.6g} and R_H <= Gamma={g:.6g}"
    return Achievability(rate_ok and hench_ok, rate_ok, hench_ok, H, g, reason)


def surface_sample(source, measure, rk_grid, de_grid, curve=None):
    """Gamma at every ``(R_K, D_E)`` grid point, one row per point in ``SURFACE_COLUMNS`` order."""
    rk_grid = np.asarray(rk_grid, dtype=float)
    de_grid = np.asarray(de_grid, dtype=float)
    if rk_grid.size == 0 or de_grid.size == 0:
        raise ValueError("grids must be nonempty")
    curve = curve or rd_curve(source, measure)
    rows = []
    for rk in rk_grid:
        for de in de_grid:
            g = gamma(rk, de, curve)
            rows.append((rk, de, g.value, g.lambda_star, g.d_star, g.check_value))
    return np.array(rows).reshape(-1, 6)


def perfect_secrecy_threshold(source):
    """Key rate needed for zero-distortion secrecy; the source entropy."""
    return entropy(source)


def r_de_estimate(cb, measure, D_E, delta, config=None, cap=16):
    """Distortion-based equivocation of a concrete codebook, in bits per symbol.

    The wiretapper's posterior over ``S^n`` given the public message is
    computed exactly (uniform key, the implemented encoder), then the
    conditional rate-distortion problem on ``n``-blocks is solved with a
    common Lagrange slope across messages.
    """
    seqs, joint = bin_posteriors(cb, delta, cap=max(cap, 1))
    pb = joint.sum(axis=0)
    weight = pb.sum(axis=1)
    parts = [(float(w), Source(pb[b] / w)) for b, w in enumerate(weight) if w > 0]
    total = sum(w for w, _ in parts)
    parts = [(w / total, s) for w, s in parts]
    mn = block_measure(measure, cb.n, cap=cap)
    return conditional_rd(parts, mn, D_E, n=cb.n, config=config, cap=cap)


__all__ = [
    "Achievability",
    "GammaResult",
    "RegionPoint",
    "SURFACE_COLUMNS",
    "gamma",
    "is_achievable",
    "lower_hull",
    "perfect_secrecy_threshold",
    "r_de_estimate",
    "surface_sample",
]
