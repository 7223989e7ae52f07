"""Independent reference computations used by the tests.

Nothing here imports the package's distance kernels or solvers.
"""

import itertools
import math

import numpy as np


def norm_value(v, kind="euclidean", blocks=None):
    v = np.asarray(v, dtype=float)
    if kind == "euclidean":
        return math.sqrt(float(np.sum(v * v)))
    if kind == "max":
        return float(np.max(np.abs(v))) if v.size else 0.0
    out, i = 0.0, 0
    for d, sub in blocks:
        out = max(out, norm_value(v[i:i + d], sub))
        i += d
    return out


def dist_loop(x, C, **kw):
    best = math.inf
    for c in C:
        best = min(best, norm_value(np.asarray(x) - np.asarray(c), **kw))
    return best


def excess_loop(C, D, **kw):
    if len(C) == 0:
        return 0.0
    if len(D) == 0:
        return math.inf
    return max(dist_loop(c, D, **kw) for c in C)


def dl_loop(C, D, rho, **kw):
    Ct = [c for c in C if norm_value(c, **kw) <= rho]
    Dt = [d for d in D if norm_value(d, **kw) <= rho]
    return max(excess_loop(Ct, D, **kw), excess_loop(Dt, C, **kw))


def golden_section(f, a, b, tol=1e-12):
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def bisect(f, lo, hi, tol=1e-14):
    flo = f(lo)
    assert flo * f(hi) <= 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def lcp_enumerate(M, q):
    """All complementary solutions found by trying every support."""
    M, q = np.asarray(M, float), np.asarray(q, float)
    n = len(q)
    sols = []
    for S in itertools.chain.from_iterable(itertools.combinations(range(n), k) for k in range(n + 1)):
        S = list(S)
        x = np.zeros(n)
        if S:
            try:
                x[S] = np.linalg.solve(M[np.ix_(S, S)], -q[S])
            except np.linalg.LinAlgError:
                continue
        w = M @ x + q
        if (x >= -1e-12).all() and (w >= -1e-12).all() and abs(x @ w) < 1e-10:
            sols.append(x)
    return sols


def epi_cloud_points(values, xs, rho, h_alpha):
    """Truncated sampled epigraph built with plain loops (1-D x)."""
    n = int(math.ceil(2 * rho / h_alpha - 1e-9))
    levels = [(-rho * (n - k) + rho * k) / n for k in range(n + 1)]
    pts = []
    for x, v in zip(xs, values):
        if not math.isfinite(v) or abs(x) > rho:
            continue
        for a in levels:
            if a >= v - 1e-12:
                pts.append((x, a))
    return pts
