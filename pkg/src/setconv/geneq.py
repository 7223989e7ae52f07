"""Set-valued mappings, graph distances and generalized-equation diagnostics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, ValidationError
from .fields import GridSpec, cubic_constraint
from .geometry import (INF, Ball, NormSpec, PointCloud, excess, interval_sample, lattice, product_norm,
                       truncate, truncated_hausdorff)
from .fields import smooth_plus_values
from .solvers import sigmoid
from .vargeo import PiecewiseSmooth1D, subdifferential_1d


@dataclass
class SetValuedMap:
    """S: R^in_dim ⇉ R^out_dim.

    Either single-valued through ``func`` (rows -> rows), or described by a
    vectorized membership test ``member(X, Y)`` that is evaluated on an
    output grid. ``domain`` marks inputs with nonempty values.
    """

    in_dim: int
    out_dim: int
    func: Callable[[np.ndarray], np.ndarray] | None = None
    member: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    domain: Callable[[np.ndarray], np.ndarray] | None = None
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    label: str = ""
    convex_graph: bool = False
    sampler: Callable[[np.ndarray, GridSpec | None], np.ndarray] | None = None

    def __post_init__(self):
        if sum(v is not None for v in (self.func, self.member, self.sampler)) != 1:
            raise ValidationError("a mapping needs exactly one of func, member, sampler")

    @property
    def single_valued(self) -> bool:
        return self.func is not None

    def _in_domain(self, X):
        return np.ones(len(X), dtype=bool) if self.domain is None else np.asarray(self.domain(X), dtype=bool)

    def graph_rows(self, X: np.ndarray, out_grid: GridSpec | None = None) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.in_dim)
        dom = self._in_domain(X)
        X = X[dom]
        if self.func is not None:
            Y = np.asarray(self.func(X), dtype=float).reshape(len(X), self.out_dim)
            return np.hstack([X, Y])
        if self.sampler is not None:
            return np.asarray(self.sampler(X, out_grid), dtype=float).reshape(-1, self.in_dim + self.out_dim)
        if out_grid is None:
            raise ValidationError(f"mapping {self.label or '<anonymous>'} needs an output grid")
        if out_grid.dim != self.out_dim:
            raise DimensionMismatch("output grid dimension differs from the mapping's")
        Y = out_grid.points()
        chunks = []
        for x in X:
            keep = np.asarray(self.member(np.broadcast_to(x, (len(Y), self.in_dim)), Y), dtype=bool)
            if keep.any():
                chunks.append(np.hstack([np.broadcast_to(x, (int(keep.sum()), self.in_dim)), Y[keep]]))
        if not chunks:
            return np.zeros((0, self.in_dim + self.out_dim))
        return np.vstack(chunks)

    def eval(self, x, out_grid: GridSpec | None = None) -> PointCloud:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.in_dim,):
            raise DimensionMismatch(f"input has dimension {x.shape[0]}, mapping expects {self.in_dim}")
        G = self.graph_rows(x[None, :], out_grid)
        return PointCloud(self.out_dim, G[:, self.in_dim:])

    def graph(self, in_grid: GridSpec, out_grid: GridSpec | None = None) -> PointCloud:
        if in_grid.dim != self.in_dim:
            raise DimensionMismatch("input grid dimension differs from the mapping's")
        return PointCloud(self.in_dim + self.out_dim, self.graph_rows(in_grid.points(), out_grid))


# --------------------------------------------------------------------------
# built-in mappings


_EPS = 1e-12


def sharpness_S() -> SetValuedMap:
    """S(x) = [x, ∞) for x in [0, 1], empty otherwise."""
    return SetValuedMap(1, 1, member=lambda X, Y: Y[:, 0] >= X[:, 0] - _EPS,
                        domain=lambda X: (X[:, 0] >= -_EPS) & (X[:, 0] <= 1 + _EPS), label="sharpness-S",
                        convex_graph=True)


def sharpness_T() -> SetValuedMap:
    """T(x) = (1, ∞) for x in [1, 2]; on an output lattice through 1 this starts at 1 + h_out."""
    return SetValuedMap(1, 1, member=lambda X, Y: Y[:, 0] > 1 + _EPS,
                        domain=lambda X: (X[:, 0] >= 1 - _EPS) & (X[:, 0] <= 2 + _EPS), label="sharpness-T",
                        convex_graph=True)


def feasible_set_map(bound: float = 10.0) -> SetValuedMap:
    """S(u) = {x in [-bound, bound] | u x <= 1}."""
    return SetValuedMap(1, 1, member=lambda U, Y: (np.abs(Y[:, 0]) <= bound + _EPS) & (U[:, 0] * Y[:, 0] <= 1 + _EPS),
                        label="feasmap")


def step_map() -> SetValuedMap:
    """{1} for x > 0 and {0} for x <= 0; the graph misses (0, 1)."""
    return SetValuedMap(1, 1, func=lambda X: (X[:, :1] > 0).astype(float), label="step")


def reciprocal_map() -> SetValuedMap:
    """{1/x} for x != 0 and {0} at 0."""
    def f(X):
        x = X[:, :1]
        with np.errstate(divide="ignore"):
            return np.where(x == 0, 0.0, 1.0 / np.where(x == 0, 1.0, x))
    return SetValuedMap(1, 1, func=f, label="reciprocal")


def constant_map(values: Sequence[Sequence[float]], in_dim: int = 1) -> SetValuedMap:
    V = np.atleast_2d(np.asarray(values, dtype=float))

    def sampler(X, _grid):
        return np.vstack([np.hstack([np.broadcast_to(x, (len(V), in_dim)), V]) for x in X]) if len(X) else \
            np.zeros((0, in_dim + V.shape[1]))
    return SetValuedMap(in_dim, V.shape[1], sampler=sampler, label="constant", convex_graph=len(V) == 1)


def single_valued(func: Callable, in_dim: int, out_dim: int, jacobian: Callable | None = None,
                  label: str = "") -> SetValuedMap:
    return SetValuedMap(in_dim, out_dim, func=func, jacobian=jacobian, label=label)


def affine_map(a: float, b: float) -> SetValuedMap:
    """x -> a x + b on the line."""
    return single_valued(lambda X: a * X + b, 1, 1, lambda x: np.array([[a]]), f"affine({a},{b})")


def sin_map() -> SetValuedMap:
    """x -> x + sin x + 1."""
    return single_valued(lambda X: X + np.sin(X) + 1, 1, 1, lambda x: np.atleast_2d(1 + np.cos(x)), "sin-homotopy")


def homotopy_family(S: SetValuedMap, lam: float) -> SetValuedMap:
    """x -> (1 - λ) S(x) + λ x for single-valued S with in_dim = out_dim."""
    if not S.single_valued or S.in_dim != S.out_dim:
        raise ValidationError("homotopy needs a single-valued map R^n -> R^n")
    jac = None
    if S.jacobian is not None:
        def jac(x):
            return (1 - lam) * np.atleast_2d(S.jacobian(x)) + lam * np.eye(S.in_dim)
    return single_valued(lambda X: (1 - lam) * S.func(X) + lam * X, S.in_dim, S.out_dim, jac,
                         f"{S.label}[lambda={lam}]")


def lcp_normal_map(M, q) -> SetValuedMap:
    """z -> M z+ + q + z - z+, the exact normal map of the LCP."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))

    def f(Z):
        P = np.maximum(Z, 0.0)
        return P @ M.T + q + Z - P
    return single_valued(f, len(q), len(q), None, "lcp")


def lcp_smoothed_map(M, q, theta: float) -> SetValuedMap:
    """z -> M Φ(z) + q + z - Φ(z) with Φ the smoothed plus function."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))

    def f(Z):
        P = smooth_plus_values(Z, theta)
        return P @ M.T + q + Z - P

    def jac(z):
        d = sigmoid(theta * np.asarray(z, dtype=float))
        return M * d[None, :] + np.diag(1 - d)
    return single_valued(f, len(q), len(q), jac, f"lcp-smoothed(theta={theta})")


CANONICAL_LCP = (np.array([[2.0, 1.0], [1.0, 2.0]]), np.array([-1.0, -1.0]))


MAPPINGS: dict[str, Callable[[dict], SetValuedMap]] = {
    "sharpness-S": lambda o: sharpness_S(),
    "sharpness-T": lambda o: sharpness_T(),
    "feasmap": lambda o: feasible_set_map(float(o.get("bound", 10.0))),
    "sin-homotopy": lambda o: sin_map() if "lambda" not in o else homotopy_family(sin_map(), float(o["lambda"])),
    "lcp": lambda o: lcp_normal_map(o.get("M", CANONICAL_LCP[0]), o.get("q", CANONICAL_LCP[1])),
    "lcp-smoothed": lambda o: lcp_smoothed_map(o.get("M", CANONICAL_LCP[0]), o.get("q", CANONICAL_LCP[1]),
                                               float(o.get("theta", 10.0))),
    "step": lambda o: step_map(),
    "identity": lambda o: single_valued(lambda X: X, int(o.get("dim", 1)), int(o.get("dim", 1)),
                                        lambda x: np.eye(int(o.get("dim", 1))), "identity"),
    "affine": lambda o: affine_map(float(o.get("a", 2.0)), float(o.get("b", 1.0))),
    "cubic-level": lambda o: cubic_feasible_map(),
    "reciprocal": lambda o: reciprocal_map(),
}


def mapping_from_json(obj) -> SetValuedMap:
    if isinstance(obj, str):
        obj = {"name": obj}
    if not isinstance(obj, dict) or "name" not in obj:
        raise ValidationError("field 'name': mapping spec needs a name")
    name = obj["name"]
    if name not in MAPPINGS:
        raise ValidationError(f"field 'name': unknown mapping {name!r}; known: {', '.join(sorted(MAPPINGS))}")
    try:
        return MAPPINGS[name](obj)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"mapping {name!r}: {exc}") from None


# --------------------------------------------------------------------------
# distances and preimages


def graph_norm(S: SetValuedMap, in_norm: NormSpec | None = None, out_norm: NormSpec | None = None) -> NormSpec:
    return product_norm(S.in_dim, in_norm or NormSpec.euclidean(), S.out_dim, out_norm or NormSpec.euclidean())


def graph_distance(S: SetValuedMap, T: SetValuedMap, rho: float, in_grid: GridSpec, out_grid: GridSpec | None = None,
                   in_norm: NormSpec | None = None, out_norm: NormSpec | None = None, center=None) -> float:
    """Truncated Hausdorff distance between sampled graphs under max{||x||_a, ||y||_b}."""
    if (S.in_dim, S.out_dim) != (T.in_dim, T.out_dim):
        raise DimensionMismatch("mappings act between different spaces")
    N = graph_norm(S, in_norm, out_norm)
    return truncated_hausdorff(S.graph(in_grid, out_grid), T.graph(in_grid, out_grid), rho, N, center)


def preimage(S: SetValuedMap, y_ball: Ball, domain_grid: GridSpec, out_grid: GridSpec | None = None) -> PointCloud:
    """Grid points x with dist(ȳ, S(x)) <= ε, computed on the sampled values."""
    G = S.graph(domain_grid, out_grid).points
    if len(G) == 0:
        return PointCloud.empty(S.in_dim)
    hit = y_ball.contains(G[:, S.in_dim:])
    return PointCloud(S.in_dim, G[hit, :S.in_dim]).dedup()


@dataclass
class NearSolutionReport:
    excess: float
    dl: float
    holds: bool
    margin: float
    epsilon: float
    delta: float
    preconditions: dict
    boundary_delta: bool      # δ = ε + dl exactly: needs a closed graph of T

    @property
    def preconditions_hold(self) -> bool:
        return all(self.preconditions.values())


def near_solution_check(S: SetValuedMap, T: SetValuedMap, y_bar, epsilon: float, delta: float, rho: float,
                        in_grid: GridSpec, out_grid: GridSpec | None = None, in_norm: NormSpec | None = None,
                        out_norm: NormSpec | None = None, slack: float = 0.0) -> NearSolutionReport:
    """exs(S⁻¹(B(ȳ,ε)) ∩ B(0,ρ); T⁻¹(B(ȳ,δ))) against dl_ρ(gph S, gph T)."""
    in_norm = in_norm or NormSpec.euclidean()
    out_norm = out_norm or NormSpec.euclidean()
    y_bar = np.atleast_1d(np.asarray(y_bar, dtype=float))
    dl = graph_distance(S, T, rho, in_grid, out_grid, in_norm, out_norm)
    pre = {
        "epsilon_in_range": 0 <= epsilon <= rho,
        "y_bar_in_ball": out_norm(y_bar) <= rho - epsilon,
        "delta_large_enough": delta > epsilon + dl,
    }
    A = truncate(preimage(S, Ball(y_bar, epsilon, out_norm), in_grid, out_grid), rho, in_norm)
    B = preimage(T, Ball(y_bar, delta, out_norm), in_grid, out_grid)
    ex = excess(A, B, in_norm)
    return NearSolutionReport(ex, dl, ex <= dl + slack, dl - ex, float(epsilon), float(delta), pre,
                              math.isclose(delta, epsilon + dl, rel_tol=0, abs_tol=1e-12))


# --------------------------------------------------------------------------
# semicontinuity


@dataclass
class SemicontinuityReport:
    verdict: bool
    worst: float
    worst_at: np.ndarray | None
    tol: float


def _window(C: PointCloud, out_grid: GridSpec | None, norm: NormSpec) -> PointCloud:
    if out_grid is None or C.is_empty:
        return C
    lo = np.array([b[0] for b in out_grid.box])
    hi = np.array([b[1] for b in out_grid.box])
    keep = np.all((C.points >= lo - _EPS) & (C.points <= hi + _EPS), axis=1)
    return PointCloud(C.dim, C.points[keep])


def _approach_points(x: np.ndarray, h: float, levels: int):
    n = len(x)
    for k in range(1, levels + 1):
        r = h / 2 ** k
        for i in range(n):
            for s in (1.0, -1.0):
                e = np.zeros(n)
                e[i] = s * r
                yield i, s, k, x + e


def osc_diagnostic(S: SetValuedMap, in_grid: GridSpec, out_grid: GridSpec | None = None, tol: float | None = None,
                   levels: int = 6, out_norm: NormSpec | None = None) -> SemicontinuityReport:
    """Closed-graph surrogate.

    From every grid point x̄, approach along ±e_i at distances h/2^k; the
    values at the closest approach, restricted to the output window, must lie
    within ``tol`` of S(x̄). A violation is a limit point of the graph that
    the graph misses.
    """
    out_norm = out_norm or NormSpec.euclidean()
    h = in_grid.spacing
    if tol is None:
        tol = 3 * max(h, out_grid.spacing if out_grid is not None else 0.0)
    worst, where = 0.0, None
    for x in in_grid.points():
        base = S.eval(x, out_grid)
        for i, s, k, xk in _approach_points(x, h, levels):
            if k != levels:
                continue
            V = _window(S.eval(xk, out_grid), out_grid, out_norm)
            e = excess(V, base, out_norm)
            if e > worst:
                worst, where = e, x
    return SemicontinuityReport(worst <= tol, worst, where, float(tol))


def isc_diagnostic(S: SetValuedMap, in_grid: GridSpec, out_grid: GridSpec | None = None, tol: float | None = None,
                   levels: int = 6, out_norm: NormSpec | None = None) -> SemicontinuityReport:
    """Inner semicontinuity at interior domain points, for convex-graph mappings only.

    Every value at x̄ (inside the output window) must be within ``tol`` of the
    values at nearby points x̄ ± h/2^k e_i.
    """
    if not S.convex_graph:
        raise ValidationError("isc diagnostics are limited to mappings with a convex graph")
    out_norm = out_norm or NormSpec.euclidean()
    h = in_grid.spacing
    if tol is None:
        tol = 3 * max(h, out_grid.spacing if out_grid is not None else 0.0)
    worst, where = 0.0, None
    for x in in_grid.points():
        base = _window(S.eval(x, out_grid), out_grid, out_norm)
        if base.is_empty:
            continue
        near = [S.eval(xk, out_grid) for _, _, k, xk in _approach_points(x, h, levels) if k == levels]
        if any(v.is_empty for v in near):
            continue    # boundary of the domain
        for V in near:
            e = excess(base, V, out_norm)
            if e > worst:
                worst, where = e, x
    return SemicontinuityReport(worst <= tol, worst, where, float(tol))


# --------------------------------------------------------------------------
# subgradient graphs


def subgradient_graph_1d(f: PiecewiseSmooth1D, grid: GridSpec, out_spacing: float | None = None) -> PointCloud:
    """Sample of gph ∂f for convex f: (x, f'(x)) off kinks, vertical segments at kinks."""
    if grid.dim != 1:
        raise DimensionMismatch("subgradient graphs need a 1-D grid")
    out_spacing = out_spacing or grid.spacing
    x = grid.axis(0)
    lo, hi = grid.box[0]
    bps = [b for b in f.breakpoints if lo <= b <= hi]
    vals = f.values(x)
    smooth = np.isfinite(vals) & ~np.isin(x, bps)
    rows = [np.stack([x[smooth], f.derivative(x[smooth])], axis=1)]
    for b in bps:
        if not math.isfinite(f.value(b)):
            continue
        sub = subdifferential_1d(f, b)
        if sub.points and len(sub.points) > 1:
            raise ValidationError("subgradient graphs are defined here for convex functions only")
        for p in sub.points:
            rows.append(np.array([[b, p]]))
        for a, c in sub.intervals:
            # half-lines are cut at the slope range seen on the grid plus a margin
            span = max(1.0, float(np.abs(f.derivative(x[smooth])).max()) if smooth.any() else 1.0)
            a = a if math.isfinite(a) else -2 * span
            c = c if math.isfinite(c) else 2 * span
            ys = interval_sample(a, c, out_spacing)
            rows.append(np.stack([np.full(len(ys), b), ys], axis=1))
    return PointCloud(2, np.vstack(rows))


def subgradient_graph_distance(f: PiecewiseSmooth1D, g: PiecewiseSmooth1D, grid: GridSpec, rho: float,
                               out_spacing: float | None = None) -> float:
    """dl_ρ between sampled gph ∂f and gph ∂g under max{|x|, |v|}."""
    N = NormSpec.max_norm()
    return truncated_hausdorff(subgradient_graph_1d(f, grid, out_spacing), subgradient_graph_1d(g, grid, out_spacing),
                               rho, N)


# --------------------------------------------------------------------------
# stationarity of composite functions


@dataclass
class StationarityBound:
    bound: float
    dl_subgradients: float
    value_term: float
    jacobian_term: float
    sampled_dl: float | None

    @property
    def holds(self) -> bool | None:
        return None if self.sampled_dl is None else self.sampled_dl <= self.bound


def composite_stationarity_bound(phi: PiecewiseSmooth1D, psi: PiecewiseSmooth1D, F: Callable, JF: Callable,
                                 G: Callable, JG: Callable, rho: float, x_grid: GridSpec,
                                 z_spacing: float | None = None, sample_graphs: bool = True,
                                 yz_steps: int = 16) -> StationarityBound:
    """Bound on the graph distance between the stationarity maps of φ∘F and ψ∘G (m = 1).

    F, G map (k, n) -> (k,) and JF, JG map (k, n) -> (k, n). The sup runs
    over grid points of the Euclidean ρ-ball. With ``sample_graphs`` the
    mappings S(x,y,z) = {F(x) - z} × {∂φ(z) - y} × {∇F(x) y} and the
    analogue for T are sampled on a shared grid and compared directly.
    """
    if JF is None or JG is None:
        raise ValidationError("missing jacobian")
    e2 = NormSpec.euclidean()
    n = x_grid.dim
    X = x_grid.points()
    X = X[e2.rows(X) <= rho]
    if len(X) == 0:
        raise ValidationError("the grid has no points in the rho-ball")
    zs = z_spacing or x_grid.spacing
    zr = 2 * rho + 1
    zgrid = GridSpec(((-zr, zr),), (int(math.ceil(2 * zr / zs)),))
    dl_sub = subgradient_graph_distance(phi, psi, zgrid, 2 * rho, zs)
    dF = np.abs(np.asarray(G(X), dtype=float).ravel() - np.asarray(F(X), dtype=float).ravel())
    dJ = np.linalg.norm(np.asarray(JG(X), dtype=float).reshape(len(X), n)
                        - np.asarray(JF(X), dtype=float).reshape(len(X), n), axis=1)
    value_term = float(dF.max() + dl_sub)
    jac_term = float(rho * dJ.max())
    bound = max(value_term, jac_term)
    sampled = None
    if sample_graphs:
        sampled = _sampled_stationarity_dl(phi, psi, F, JF, G, JG, rho, x_grid, zs, yz_steps)
    return StationarityBound(bound, dl_sub, value_term, jac_term, sampled)


def _stationarity_graph(phi, F, JF, X, ys, zs_pts, out_spacing):
    n = X.shape[1]
    FX = np.asarray(F(X), dtype=float).ravel()
    JX = np.asarray(JF(X), dtype=float).reshape(len(X), n)
    rows = []
    for z in zs_pts:
        sub = subdifferential_1d(phi, z)
        vs = list(sub.points)
        for a, c in sub.intervals:
            vs += list(interval_sample(max(a, -1e6), min(c, 1e6), out_spacing))
        for v in vs:
            for y in ys:
                u = FX - z
                w = JX * y
                k = len(X)
                rows.append(np.hstack([X, np.full((k, 1), y), np.full((k, 1), z), u[:, None],
                                       np.full((k, 1), v - y), w]))
    return np.vstack(rows)


def _sampled_stationarity_dl(phi, psi, F, JF, G, JG, rho, x_grid, zs, steps):
    n = x_grid.dim
    X = x_grid.points()
    ys = interval_sample(-rho, rho, 2 * rho / steps)
    zp = lattice(-rho, rho, zs)
    Gs = _stationarity_graph(phi, F, JF, X, ys, zp, zs)
    Gt = _stationarity_graph(psi, G, JG, X, ys, zp, zs)
    blocks = ((n, NormSpec.euclidean()), (1, NormSpec.euclidean()), (1, NormSpec.euclidean()),
              (1, NormSpec.euclidean()), (1, NormSpec.euclidean()), (n, NormSpec.euclidean()))
    N = NormSpec.product(*blocks)
    d = 2 * n + 4
    return truncated_hausdorff(PointCloud(d, Gs), PointCloud(d, Gt), rho, N)


def abs_function(scale: float = 1.0) -> PiecewiseSmooth1D:
    return PiecewiseSmooth1D.two_slopes(0.0, -scale, scale)


def smooth_abs(theta: float) -> PiecewiseSmooth1D:
    """smooth_plus(z, θ) + smooth_plus(-z, θ), a smooth convex approximation of |z|."""
    return PiecewiseSmooth1D.smooth(lambda z: smooth_plus_values(z, theta) + smooth_plus_values(-np.asarray(z), theta),
                                    lambda z: np.tanh(0.5 * theta * np.asarray(z, dtype=float)), f"smooth-abs({theta})")


def cubic_feasible_map() -> SetValuedMap:
    """u -> {x | g(x) <= u} for the cubic constraint, restricted to [-3, 3]."""
    return SetValuedMap(1, 1, member=lambda U, Y: (np.abs(Y[:, 0]) <= 3) & (cubic_constraint(Y[:, 0]) <= U[:, 0]),
                        label="cubic-level")
