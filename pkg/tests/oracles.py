"""Reference computations that share no code with the package."""

import itertools
import math

import cvxpy as cp
import numpy as np


def hb(x):
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def binary_rd(p, D):
    p = min(p, 1 - p)
    return hb(p) - hb(D) if D < p else 0.0


def rd_convex(pmf, dmat, D):
    """R(D) as a convex program over the joint pmf, in bits."""
    pmf = np.asarray(pmf, float)
    dmat = np.asarray(dmat, float)
    ks, kz = dmat.shape
    P = cp.Variable((ks, kz), nonneg=True)
    q = cp.sum(P, axis=0)
    outer = cp.reshape(pmf, (ks, 1), order="C") @ cp.reshape(q, (1, kz), order="C")
    obj = cp.sum(cp.rel_entr(P, outer)) / math.log(2)
    cons = [cp.sum(P, axis=1) == pmf, cp.sum(cp.multiply(P, dmat)) <= D]
    cp.Problem(cp.Minimize(obj), cons).solve(solver=cp.CLARABEL)
    return float(obj.value)


def conditional_rd_convex(weights, posts, dmat, D):
    """min sum_m w_m I(S;V|M=m) s.t. sum_m w_m E[d | m] <= D, as one convex program."""
    dmat = np.asarray(dmat, float)
    kz = dmat.shape[1]
    terms, dist, cons = [], 0, []
    for w, p in zip(weights, posts):
        p = np.asarray(p, float)
        # zero-probability rows carry no mass and upset the cone solver
        keep = p > 0
        p, d = p[keep], dmat[keep]
        P = cp.Variable((p.size, kz), nonneg=True)
        q = cp.sum(P, axis=0)
        outer = cp.reshape(p, (p.size, 1), order="C") @ cp.reshape(q, (1, kz), order="C")
        terms.append(w * cp.sum(cp.rel_entr(P, outer)))
        dist = dist + w * cp.sum(cp.multiply(P, d))
        cons.append(cp.sum(P, axis=1) == p)
    obj = sum(terms) / math.log(2)
    cp.Problem(cp.Minimize(obj), cons + [dist <= D]).solve(solver=cp.CLARABEL)
    return float(obj.value)


def message_equivocation(codewords, bin_size, pmf, delta, n, with_key=False):
    """H(S^n | M) / n (or H(S^n | M, K) / n) by enumerating block, key and encoder choice."""
    codewords = [tuple(int(x) for x in c) for c in codewords]
    total = len(codewords)
    pmf = list(pmf)
    joint = {}
    for s in itertools.product(range(len(pmf)), repeat=n):
        ps = math.prod(pmf[a] for a in s)
        if ps == 0:
            continue
        counts = [s.count(a) for a in range(len(pmf))]
        typical = all(abs(counts[a] / n - pmf[a]) < delta * pmf[a] - 1e-12 for a in range(len(pmf)))
        hits = [j for j, c in enumerate(codewords) if c == s] if typical else []
        choices = hits if hits else list(range(total))
        for key in range(bin_size):
            for j in choices:
                jp, js = divmod(j, bin_size)
                m = (jp, (js + key) % bin_size) + ((key,) if with_key else ())
                joint[(s, m)] = joint.get((s, m), 0.0) + ps / bin_size / len(choices)
    pm = {}
    for (s, m), v in joint.items():
        pm[m] = pm.get(m, 0.0) + v
    h_sm = -sum(v * math.log2(v) for v in joint.values() if v > 0)
    h_m = -sum(v * math.log2(v) for v in pm.values() if v > 0)
    return (h_sm - h_m) / n


def message_posteriors(codewords, bin_size, pmf, delta, n):
    """``(weights, posteriors)`` over full messages ``(j_p, m_s)``, by direct enumeration."""
    codewords = [tuple(int(x) for x in c) for c in codewords]
    total = len(codewords)
    seqs = list(itertools.product(range(len(pmf)), repeat=n))
    joint = {}
    for i, s in enumerate(seqs):
        ps = math.prod(pmf[a] for a in s)
        if ps == 0:
            continue
        counts = [s.count(a) for a in range(len(pmf))]
        typical = all(abs(counts[a] / n - pmf[a]) < delta * pmf[a] - 1e-12 for a in range(len(pmf)))
        hits = [j for j, c in enumerate(codewords) if c == s] if typical else []
        choices = hits if hits else list(range(total))
        for key in range(bin_size):
            for j in choices:
                jp, js = divmod(j, bin_size)
                m = (jp, (js + key) % bin_size)
                row = joint.setdefault(m, np.zeros(len(seqs)))
                row[i] += ps / bin_size / len(choices)
    weights = [float(r.sum()) for r in joint.values()]
    posts = [r / r.sum() for r in joint.values()]
    return weights, posts


def gamma_1d(R_K, D_E, rd, d_max, grid=200_001):
    """Gamma by scanning D with lambda on its constraint boundary (the optimum in lambda)."""
    best = min(R_K, rd(min(D_E, d_max)))
    for D in np.linspace(0, d_max, grid)[1:]:
        lam = min(1.0, D_E / D)
        best = min(best, (1 - lam) * R_K + lam * rd(D))
    return best
