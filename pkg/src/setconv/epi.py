"""Epigraph sampling, epi-distances and the bounds built on them.

Functions are observed on a tensor grid only, so every quantity here is
exact for the grid restriction of the function (value +inf off the grid).
Two independent routes give the truncated Hausdorff distance between
epigraphs: an explicit point cloud in R^(n+1) and a level-set condition
evaluated with running minimum filters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, ValidationError
from .fields import FunctionSequence, GridSpec, ScalarField, scaled
from .geometry import INF, NormSpec, PointCloud, epi_norm, excess
from .limits import SetSequence, limit_estimate


# --------------------------------------------------------------------------
# sampling


def alpha_levels(rho: float, h: float) -> tuple[np.ndarray, float]:
    """Value levels -rho = a_0 < ... < a_N = rho with spacing at most h."""
    if rho < 0:
        raise ValidationError("rho must be nonnegative")
    if rho == 0:
        return np.zeros(1), h
    N = max(1, int(math.ceil(2 * rho / h - 1e-9)))
    k = np.arange(N + 1)
    return (-rho * (N - k) + rho * k) / N, 2 * rho / N


@dataclass
class EpiCloud:
    cloud: PointCloud
    rho: float
    alpha_grid: np.ndarray
    h_alpha: float
    norm: NormSpec

    @property
    def is_empty(self) -> bool:
        return self.cloud.is_empty


def _floor_index(F: np.ndarray, rho: float, h_alpha: float) -> np.ndarray:
    """Lowest level index k with a_k >= F (clamped at 0); -1 marks F = +inf."""
    k = np.full(F.shape, -1, dtype=np.int64)
    fin = np.isfinite(F)
    k[fin] = np.maximum(0, np.ceil((F[fin] + rho) / h_alpha - 1e-9)).astype(np.int64)
    k[F == -np.inf] = 0
    return k


def _columns(X: np.ndarray, k0: np.ndarray, k1: np.ndarray, rho: float, h_alpha: float, N: int) -> np.ndarray:
    """Stack (x, a_k) for k0 <= k <= k1 per row of X."""
    counts = np.maximum(k1 - k0 + 1, 0)
    total = int(counts.sum())
    if total == 0:
        return np.zeros((0, X.shape[1] + 1))
    rows = np.repeat(np.arange(len(X)), counts)
    offs = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
    k = k0[rows] + offs
    if N == 0:
        alpha = np.zeros(total)
    else:
        alpha = (-rho * (N - k) + rho * k) / N
    return np.hstack([X[rows], alpha[:, None]])


def _grid_values(f: ScalarField, grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    if grid.dim != f.dim:
        raise DimensionMismatch(f"grid is {grid.dim}-D, function is {f.dim}-D")
    X = grid.points()
    return X, f.values(X)


def sample_epigraph(f: ScalarField, grid: GridSpec, rho: float, norm: NormSpec | None = None) -> EpiCloud:
    """Points (x, a) of the truncated sampled epigraph: grid x in B(0, rho), a >= f(x) on the level grid."""
    norm = norm or NormSpec.euclidean()
    X, F = _grid_values(f, grid)
    levels, ha = alpha_levels(rho, grid.spacing)
    N = len(levels) - 1
    k0 = _floor_index(F, rho, ha)
    inside = (k0 >= 0) & (norm.rows(X) <= rho)
    k1 = np.where(inside, N, -1)
    pts = _columns(X, np.where(inside, k0, 0), k1, rho, ha, N)
    return EpiCloud(PointCloud(f.dim + 1, pts), rho, levels, ha, epi_norm(f.dim, norm))


def _epi_target(X: np.ndarray, F: np.ndarray, rho: float, ha: float, N: int) -> np.ndarray:
    """Every grid column of the epigraph, cut at level max(floor, N).

    Higher points never matter: a window point has level <= rho, and within a
    column the nearest epigraph point sits at max(floor, level).
    """
    k0 = _floor_index(F, rho, ha)
    k1 = np.where(k0 >= 0, np.maximum(k0, N), -1)
    return _columns(X, np.where(k0 >= 0, k0, 0), k1, rho, ha, N)


def epi_distance_cloud(f: ScalarField, g: ScalarField, grid: GridSpec, rho: float,
                       norm: NormSpec | None = None) -> float:
    """Truncated Hausdorff distance between explicitly sampled epigraphs."""
    norm = norm or NormSpec.euclidean()
    if f.dim != g.dim:
        raise DimensionMismatch("functions have different dimensions")
    X, F = _grid_values(f, grid)
    _, G = _grid_values(g, grid)
    levels, ha = alpha_levels(rho, grid.spacing)
    N = len(levels) - 1
    E = epi_norm(f.dim, norm)
    inball = norm.rows(X) <= rho
    n1 = f.dim + 1

    def window(V):
        k0 = _floor_index(V, rho, ha)
        ok = (k0 >= 0) & inball
        return PointCloud(n1, _columns(X, np.where(ok, k0, 0), np.where(ok, N, -1), rho, ha, N))

    Cf, Cg = window(F), window(G)
    if Cf.is_empty and Cg.is_empty:
        raise ValidationError("no epigraph in window")
    Tf = PointCloud(n1, _epi_target(X, F, rho, ha, N))
    Tg = PointCloud(n1, _epi_target(X, G, rho, ha, N))
    return max(excess(Cf, Tg, E), excess(Cg, Tf, E))


# --------------------------------------------------------------------------
# level-set route


def _ball_min(V: np.ndarray, eta: float, spacings: np.ndarray, norm: NormSpec) -> np.ndarray:
    """min of V over grid points within distance eta of each grid point."""
    r = np.floor(eta / spacings + 1e-9).astype(int)
    r = np.minimum(r, np.array(V.shape) - 1)
    if not r.any():
        return V
    if norm.is_max_like(V.ndim):
        out = V
        for ax, ra in enumerate(r):
            if ra > 0:
                out = ndimage.minimum_filter1d(out, 2 * ra + 1, axis=ax, mode="constant", cval=np.inf)
        return out
    offs = np.stack(np.meshgrid(*[np.arange(-ra, ra + 1) * s for ra, s in zip(r, spacings)], indexing="ij"), -1)
    foot = norm.rows(offs.reshape(-1, V.ndim)).reshape(offs.shape[:-1]) <= eta * (1 + 1e-12)
    return ndimage.minimum_filter(V, footprint=foot, mode="constant", cval=np.inf)


def _one_side_ok(Vsrc, Vtgt, mask, eta, rho, spacings, norm) -> bool:
    if not mask.any():
        return True
    m = _ball_min(Vtgt, eta, spacings, norm)
    rhs = np.maximum(Vsrc[mask], -rho) + eta
    return bool(np.all(m[mask] <= rhs))


def epi_distance_kenmochi(f: ScalarField, g: ScalarField, grid: GridSpec, rho: float,
                          norm: NormSpec | None = None, eta_tol: float | None = None) -> float:
    """Smallest eta (to within eta_tol, from above) meeting both level-set conditions.

    For every grid x̄ with f(x̄) <= rho and ||x̄|| <= rho, some grid x within
    eta of x̄ must have g(x) <= max{f(x̄), -rho} + eta, and symmetrically.
    """
    norm = norm or NormSpec.euclidean()
    if f.dim != g.dim:
        raise DimensionMismatch("functions have different dimensions")
    F = f.on_grid(grid)
    G = g.on_grid(grid)
    return _kenmochi_arrays(F, G, grid, rho, norm, eta_tol)


def _kenmochi_arrays(F, G, grid, rho, norm, eta_tol=None) -> float:
    if rho < 0:
        raise ValidationError("rho must be nonnegative")
    eta_tol = grid.spacing / 2 if eta_tol is None else float(eta_tol)
    if not eta_tol > 0:
        raise ValidationError("eta_tol must be positive")
    X = grid.points()
    inball = (norm.rows(X) <= rho).reshape(grid.shape)
    mf = inball & (F <= rho)
    mg = inball & (G <= rho)
    if not np.isfinite(F).any() and not np.isfinite(G).any() and not (F == -np.inf).any():
        raise ValidationError("no epigraph in window")
    if not mf.any() and not mg.any():
        # both level sets miss the window: each truncated epigraph is empty
        if not (np.isfinite(F) | (F == -np.inf)).any() or not (np.isfinite(G) | (G == -np.inf)).any():
            raise ValidationError("no epigraph in window")
        return 0.0
    sp = grid.spacings

    def ok(eta):
        return _one_side_ok(F, G, mf, eta, rho, sp, norm) and _one_side_ok(G, F, mg, eta, rho, sp, norm)

    if ok(0.0):
        return 0.0
    hi = 2 * rho if rho > 0 else eta_tol
    if not ok(hi):
        box = np.array(grid.box)
        diam = norm(box[:, 1] - box[:, 0])
        fin = np.concatenate([F[np.isfinite(F)], G[np.isfinite(G)]])
        cap = diam + (np.abs(fin).max() if fin.size else 0.0) + 2 * rho + 1.0
        if not ok(cap):
            return INF
        lo, hi = hi, cap
    else:
        lo = 0.0
    while hi - lo > eta_tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return float(hi)


def hypo_distance(f: ScalarField, g: ScalarField, grid: GridSpec, rho: float, norm: NormSpec | None = None,
                  method: str = "kenmochi", eta_tol: float | None = None) -> float:
    """Distance between hypographs, i.e. the epi-distance of -f and -g."""
    nf, ng = scaled(f, -1.0, f"-{f.label}"), scaled(g, -1.0, f"-{g.label}")
    if method == "kenmochi":
        return epi_distance_kenmochi(nf, ng, grid, rho, norm, eta_tol)
    if method == "cloud":
        return epi_distance_cloud(nf, ng, grid, rho, norm)
    raise ValidationError(f"unknown method {method!r}")


def epi_distance(f, g, grid, rho, norm=None, method="kenmochi", eta_tol=None) -> float:
    if method == "kenmochi":
        return epi_distance_kenmochi(f, g, grid, rho, norm, eta_tol)
    if method == "cloud":
        return epi_distance_cloud(f, g, grid, rho, norm)
    raise ValidationError(f"unknown method {method!r}")


# --------------------------------------------------------------------------
# minima and near-minimizers


def sampled_argmin(X: np.ndarray, V: np.ndarray, eps: float = 0.0) -> np.ndarray:
    """Rows of X where V <= min V + eps (with a relative guard for eps = 0)."""
    fin = V[V < np.inf]
    if fin.size == 0:
        return X[:0]
    m = fin.min()
    if m == -np.inf:
        return X[V == -np.inf]
    return X[V <= m + eps + 1e-12 * (1 + abs(m))]


@dataclass
class MinimaReport:
    inf_f: float
    inf_g: float
    dl: float
    gap: float
    bound_holds: bool
    epsilon: float
    delta: float
    argmin_excess: float
    argmin_bound_holds: bool
    hypotheses: dict
    slack: float

    @property
    def hypotheses_hold(self) -> bool:
        return all(self.hypotheses.values())

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in ("inf_f", "inf_g", "dl", "gap", "bound_holds", "epsilon", "delta",
                                           "argmin_excess", "argmin_bound_holds", "slack")}
        d.update({f"hyp_{k}": v for k, v in self.hypotheses.items()})
        return d


def minima_bounds_report(f: ScalarField, g: ScalarField, grid: GridSpec, rho: float, epsilon: float = 0.0,
                         norm: NormSpec | None = None, delta: float | None = None, dl: float | None = None,
                         slack: float = 0.0) -> MinimaReport:
    """Compare minima and ε-argmins of two grid-sampled functions against their epi-distance.

    Hypothesis violations are reported in ``hypotheses``; the bounds are
    still evaluated. ``delta`` defaults to epsilon + 2 dl + 3h.
    """
    norm = norm or NormSpec.euclidean()
    if epsilon < 0:
        raise ValidationError("epsilon must be nonnegative")
    X, F = _grid_values(f, grid)
    _, G = _grid_values(g, grid)
    h = grid.spacing
    if dl is None:
        dl = epi_distance_kenmochi(f, g, grid, rho, norm)
    inf_f = float(F.min())
    inf_g = float(G.min())
    inball = norm.rows(X) <= rho

    def argmin_in_ball(V):
        A = sampled_argmin(X, V)
        return bool(len(A)) and bool((norm.rows(A) <= rho).any())

    hyp = {
        "inf_f_in_range": -rho <= inf_f < rho - epsilon,
        "inf_g_in_range": -rho <= inf_g < rho - epsilon,
        "argmin_f_in_ball": argmin_in_ball(F),
        "argmin_g_in_ball": argmin_in_ball(G),
    }
    if math.isinf(inf_f) or math.isinf(inf_g):
        gap = INF if inf_f != inf_g else 0.0
    else:
        gap = abs(inf_f - inf_g)
    if delta is None:
        delta = epsilon + 2 * dl + 3 * h
    eg = PointCloud(f.dim, X[inball & (G <= inf_g + epsilon + 1e-12 * (1 + abs(inf_g)))]) \
        if math.isfinite(inf_g) else PointCloud.empty(f.dim)
    df = PointCloud(f.dim, sampled_argmin(X, F, delta)) if math.isfinite(inf_f) else PointCloud.empty(f.dim)
    ex = excess(eg, df, norm)
    return MinimaReport(inf_f, inf_g, float(dl), gap, gap <= dl + slack, float(epsilon), float(delta), ex,
                        ex <= dl + slack, hyp, float(slack))


# --------------------------------------------------------------------------
# composite functions


VectorField = Callable[[np.ndarray], np.ndarray]


@dataclass
class CompositeBound:
    bound: float
    dl: float
    holds: bool
    rho_bar: float
    rho_hat: float
    rho_star: float
    dl_base: float
    sup_diff: float
    kappa: float
    lam: float


def _check_nondecreasing(mod: Callable[[float], float], upto: float, name: str) -> None:
    ts = np.linspace(0.0, max(upto, 0.0), 33)
    vals = np.array([float(mod(t)) for t in ts])
    if np.any(vals < 0) or np.any(np.diff(vals) < -1e-12 * (1 + np.abs(vals[:-1]))):
        raise ValidationError(f"modulus {name} is not nonnegative and nondecreasing on [0, {upto:g}]")


def composite_epi_bound(f0: ScalarField, g0: ScalarField, F: VectorField, G: VectorField,
                        h: Callable[[np.ndarray], np.ndarray], kappa: Callable[[float], float],
                        lam: Callable[[float], float], rho: float, grid: GridSpec, m: int,
                        eta_tol: float | None = None) -> CompositeBound:
    """Upper bound on dl(epi(f0 + h∘F), epi(g0 + h∘G)) from the base distance and ||F - G||.

    F and G map (k, n) arrays to (k, m); h maps (k, m) to (k,). Suprema are
    taken over grid points of Euclidean balls, and the distances are those of
    the grid-restricted functions.
    """
    e2 = NormSpec.euclidean()
    X = grid.points()
    n = f0.dim
    if g0.dim != n or grid.dim != n:
        raise DimensionMismatch("f0, g0 and grid must share a dimension")
    eta_tol = grid.spacing / 2 if eta_tol is None else eta_tol
    FX = np.asarray(F(X), dtype=float).reshape(len(X), m)
    GX = np.asarray(G(X), dtype=float).reshape(len(X), m)
    r = e2.rows(X)
    b = r <= rho
    if not b.any():
        raise ValidationError("the grid has no points in B(0, rho)")
    hF = np.asarray(h(FX), dtype=float)
    hG = np.asarray(h(GX), dtype=float)
    rho_bar = rho + max(np.abs(hF[b]).max(), np.abs(hG[b]).max())
    dl0 = epi_distance_kenmochi(f0, g0, grid, rho_bar, e2, eta_tol)
    rho_hat = rho + dl0 + eta_tol
    bh = r <= rho_hat
    rho_star = max(e2.rows(FX[bh]).max(), e2.rows(GX[bh]).max())
    _check_nondecreasing(kappa, rho_star, "kappa")
    _check_nondecreasing(lam, rho_hat, "lambda")
    k, l = float(kappa(rho_star)), float(lam(rho_hat))
    sup_diff = float(e2.rows(FX[b] - GX[b]).max())
    bound = (1 + math.sqrt(m) * k * l) * dl0 + k * sup_diff
    fc = ScalarField(n, lambda Y: _add(f0.values(Y), np.asarray(h(np.asarray(F(Y)).reshape(len(Y), m)))), None, "f")
    gc = ScalarField(n, lambda Y: _add(g0.values(Y), np.asarray(h(np.asarray(G(Y)).reshape(len(Y), m)))), None, "g")
    dl = epi_distance_kenmochi(fc, gc, grid, rho, e2, eta_tol)
    return CompositeBound(bound, dl, dl <= bound + eta_tol, rho_bar, rho_hat, rho_star, dl0, sup_diff, k, l)


def _add(a, b):
    with np.errstate(invalid="ignore"):
        s = a + b
    s[np.isnan(s)] = np.inf
    return s


# --------------------------------------------------------------------------
# tightness and consequences of epi-convergence


def _inf_of(seq: FunctionSequence, nu: int, grid: GridSpec) -> float:
    if seq.infimum is not None:
        return float(seq.infimum(nu))
    return float(seq(nu).values(grid.points()).min())


@dataclass
class TightnessReport:
    epsilons: list
    nu_schedule: list
    tail: list
    infima: list
    table: dict          # (eps, box index) -> list of slack values over the tail (<= 0 passes)
    witness: dict        # eps -> smallest passing box index or None

    @property
    def tight(self) -> bool:
        return all(w is not None for w in self.witness.values())


def tightness_report(seq: FunctionSequence, epsilons: Sequence[float], boxes: Sequence[GridSpec],
                     nu_schedule: Sequence[int], tail_start: int | None = None,
                     reference_grid: GridSpec | None = None) -> TightnessReport:
    """For each ε find the first listed box B with inf_B f^ν <= inf f^ν + ε over the tail.

    inf f^ν is the exact infimum when the sequence supplies one, otherwise the
    minimum over ``reference_grid`` (default: the last box).
    """
    if not boxes:
        raise ValidationError("need at least one box")
    nus = [int(v) for v in nu_schedule]
    if not nus:
        raise ValidationError("nu_schedule is empty")
    start = nus[len(nus) // 2] if tail_start is None else tail_start
    tail = [v for v in nus if v >= start]
    ref = reference_grid or boxes[-1]
    infima = [_inf_of(seq, v, ref) for v in nus]
    inf_map = dict(zip(nus, infima))
    table, witness = {}, {}
    for eps in epsilons:
        witness[eps] = None
        for bi, box in enumerate(boxes):
            P = box.points()
            slack = [float(seq(v).values(P).min() - inf_map[v] - eps) for v in tail]
            table[(eps, bi)] = slack
            if witness[eps] is None and all(s <= 0 for s in slack):
                witness[eps] = bi
    return TightnessReport(list(epsilons), nus, tail, infima, table, witness)


@dataclass
class ConsequencesReport:
    nu_schedule: list
    inf_seq: list
    inf_f: float
    tol: float
    part_a_excess: float          # excess of outer estimate of ε^ν-argmin over argmin f
    part_b: bool                  # limsup inf f^ν <= inf f
    inf_converges: bool           # inf f^ν -> inf f (part c/d)
    part_e_excess: float          # excess of argmin f over the inner estimate of ε-argmin
    best_schedule: tuple          # (c, beta, two-sided score)
    search: list = field(default_factory=list)

    @property
    def part_a(self) -> bool:
        # the outer estimate already carries a tol-neighbourhood of the tail sets
        return self.part_a_excess <= 2 * self.tol

    @property
    def part_e(self) -> bool:
        return self.part_e_excess <= self.tol


def _argmin_sequence(seq: FunctionSequence, X: np.ndarray, infs: dict, eps_of: Callable[[int], float]) -> SetSequence:
    n = X.shape[1]

    def gen(nu):
        V = seq(nu).values(X)
        return PointCloud(n, X[V <= infs[nu] + eps_of(nu) + 1e-12 * (1 + abs(infs[nu]))])
    return SetSequence(n, gen)


def epi_consequences_report(seq: FunctionSequence, f: ScalarField, grid: GridSpec, nu_max: int,
                            eps_schedule: Callable[[int], float] | None = None, eps_fixed: float = 0.1,
                            tol: float | None = None, f_inf: float | None = None,
                            cs: Sequence[float] = (0.1, 1.0, 10.0), betas: Sequence[float] = (0.25, 0.5, 1.0),
                            norm: NormSpec | None = None) -> ConsequencesReport:
    """Sampled check of what epi-convergence implies for minima and near-minimizers.

    All argmin clouds are subsets of the grid. Indices run over 1..nu_max and
    the tail window is the second half.
    """
    norm = norm or NormSpec.euclidean()
    X = grid.points()
    h = grid.spacing
    tol = 3 * h if tol is None else tol
    nus = list(range(1, nu_max + 1))
    tail_lo = max(1, math.ceil(nu_max / 2))
    infs = {v: _inf_of(seq, v, grid) for v in nus}
    Fv = f.values(X)
    inf_f = float(Fv.min()) if f_inf is None else float(f_inf)
    argmin_f = PointCloud(f.dim, sampled_argmin(X, Fv))
    tail_inf = [infs[v] for v in nus if v >= tail_lo]
    part_b = max(tail_inf) <= inf_f + tol
    inf_conv = abs(infs[nu_max] - inf_f) <= tol

    probes = PointCloud(f.dim, X)
    eps_schedule = eps_schedule or (lambda v: 1.0 / v)
    outer = limit_estimate(_argmin_sequence(seq, X, infs, eps_schedule), nu_max, probes, tol, "outer", norm=norm)
    a_exc = excess(outer.candidate, argmin_f, norm)
    inner_e = limit_estimate(_argmin_sequence(seq, X, infs, lambda v: eps_fixed), nu_max, probes, tol, "inner",
                             norm=norm)
    e_exc = excess(argmin_f, inner_e.candidate, norm)

    search, best = [], None
    for c in cs:
        for beta in betas:
            sch = (lambda cc, bb: (lambda v: cc * v ** (-bb)))(c, beta)
            s = _argmin_sequence(seq, X, infs, sch)
            o = limit_estimate(s, nu_max, probes, tol, "outer", norm=norm).candidate
            i = limit_estimate(s, nu_max, probes, tol, "inner", norm=norm).candidate
            score = max(excess(o, argmin_f, norm), excess(argmin_f, i, norm))
            search.append((c, beta, score))
            if best is None or score < best[2]:
                best = (c, beta, score)
    return ConsequencesReport(nus, [infs[v] for v in nus], inf_f, tol, a_exc, part_b, inf_conv, e_exc, best, search)


@dataclass
class CharacterizationCheck:
    condition_a: bool
    condition_b: bool
    worst_a: float
    worst_b: float


def characterization_check(seq: FunctionSequence, f: ScalarField, grid: GridSpec, probes_mask: np.ndarray | None,
                           nu_schedule: Sequence[int], radius: Callable[[int], float], tol: float,
                           norm: NormSpec | None = None) -> CharacterizationCheck:
    """Sampled liminf/limsup conditions at grid probes.

    (a) min of f^ν over B(x, r_ν) >= f(x) - tol and (b) the same minimum
    <= f(x) + tol, both at the last scheduled index; r_ν should shrink more
    slowly than the grid spacing.
    """
    norm = norm or NormSpec.euclidean()
    Fx = f.on_grid(grid)
    mask = np.isfinite(Fx) if probes_mask is None else (probes_mask & np.isfinite(Fx))
    nu = list(nu_schedule)[-1]
    m = _ball_min(seq(nu).on_grid(grid), radius(nu), grid.spacings, norm)
    da = Fx[mask] - m[mask]
    db = m[mask] - Fx[mask]
    wa = float(da.max()) if da.size else 0.0
    wb = float(db.max()) if db.size else 0.0
    return CharacterizationCheck(wa <= tol, wb <= tol, wa, wb)
