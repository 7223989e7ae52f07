"""Tangent and normal cones, 1-D subgradients and optimality residuals.

Exact cones are available for polyhedra given by inequalities. Other sets go
through sampled magnification, which also serves as a cross-check of the
exact route.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import nnls
from scipy.spatial import cKDTree

from .errors import DimensionMismatch, ValidationError
from .geometry import NormSpec, PointCloud
from .limits import SetSequence, limit_estimate

ENUM_MAX_DIM = 3


# --------------------------------------------------------------------------
# polyhedra and cones


@dataclass(frozen=True)
class ConvexPolyhedron:
    """{x | A x <= b}."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        if A.shape[0] != b.shape[0]:
            raise ValidationError(f"A has {A.shape[0]} rows but b has {b.shape[0]} entries")
        if not np.all(np.isfinite(A)) or not np.all(np.isfinite(b)):
            raise ValidationError("polyhedron data must be finite")
        if np.any(np.linalg.norm(A, axis=1) == 0):
            raise ValidationError("rows of A must be nonzero")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    def row_tol(self) -> np.ndarray:
        return 1e-9 * (1 + np.abs(self.b) + np.linalg.norm(self.A, axis=1))

    def contains(self, x) -> bool:
        x = self._point(x)
        return bool(np.all(self.A @ x <= self.b + self.row_tol()))

    def contains_rows(self, X: np.ndarray) -> np.ndarray:
        return np.all(X @ self.A.T <= self.b + self.row_tol(), axis=1)

    def active(self, x) -> np.ndarray:
        x = self._point(x)
        return self.A @ x >= self.b - self.row_tol()

    def _point(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise DimensionMismatch(f"point has dimension {x.shape[0]}, polyhedron lives in R^{self.dim}")
        return x

    def to_json(self) -> dict:
        return {"A": self.A.tolist(), "b": self.b.tolist()}

    @classmethod
    def from_json(cls, obj) -> "ConvexPolyhedron":
        if not isinstance(obj, dict):
            raise ValidationError("polyhedron must be a JSON object")
        for key in ("A", "b"):
            if key not in obj:
                raise ValidationError(f"field '{key}': missing")
        try:
            A = np.array(obj["A"], dtype=float)
        except (TypeError, ValueError):
            raise ValidationError("field 'A': not a numeric matrix") from None
        try:
            b = np.array(obj["b"], dtype=float)
        except (TypeError, ValueError):
            raise ValidationError("field 'b': not a numeric vector") from None
        if A.ndim != 2:
            raise ValidationError("field 'A': expected a list of rows")
        if b.ndim != 1:
            raise ValidationError("field 'b': expected a flat list")
        return cls(A, b)

    @classmethod
    def box(cls, lo, hi) -> "ConvexPolyhedron":
        lo, hi = np.atleast_1d(lo).astype(float), np.atleast_1d(hi).astype(float)
        n = len(lo)
        return cls(np.vstack([np.eye(n), -np.eye(n)]), np.concatenate([hi, -lo]))


def _unit_rows(V: np.ndarray) -> np.ndarray:
    if len(V) == 0:
        return V
    nrm = np.linalg.norm(V, axis=1)
    V = V[nrm > 1e-12] / nrm[nrm > 1e-12, None]
    if len(V) == 0:
        return V
    key = np.round(V, 10) + 0.0
    _, idx = np.unique(key, axis=0, return_index=True)
    return V[np.sort(idx)]


@dataclass
class Cone:
    """Closed convex cone in R^dim, as {w | G w <= 0} and/or cone(generators)."""

    dim: int
    hrep: np.ndarray | None = None
    gens: np.ndarray | None = None

    def __post_init__(self):
        if self.hrep is None and self.gens is None:
            raise ValidationError("cone needs an H-representation or generators")
        if self.hrep is not None:
            self.hrep = np.asarray(self.hrep, dtype=float).reshape(-1, self.dim)
        if self.gens is not None:
            self.gens = _unit_rows(np.asarray(self.gens, dtype=float).reshape(-1, self.dim))

    @classmethod
    def halfspaces(cls, G) -> "Cone":
        G = np.asarray(G, dtype=float)
        return cls(G.shape[-1], hrep=G)

    @classmethod
    def generated(cls, V, dim: int | None = None) -> "Cone":
        V = np.asarray(V, dtype=float)
        return cls(dim or V.shape[-1], gens=V)

    @classmethod
    def whole(cls, dim: int) -> "Cone":
        return cls(dim, hrep=np.zeros((0, dim)))

    @classmethod
    def zero(cls, dim: int) -> "Cone":
        return cls(dim, gens=np.zeros((0, dim)))

    def generators(self) -> np.ndarray:
        if self.gens is None:
            self.gens = _unit_rows(hrep_to_generators(self.hrep))
        return self.gens

    def halfspace_rows(self) -> np.ndarray:
        if self.hrep is None:
            # cone(V) = {w | U w <= 0} where U generates the polar {u | V u <= 0}
            V = self.gens
            self.hrep = hrep_to_generators(V) if len(V) else np.vstack([np.eye(self.dim), -np.eye(self.dim)])
        return self.hrep

    def polar(self) -> "Cone":
        """{v | <v, w> <= 0 for all w in the cone}."""
        if self.hrep is not None:
            return Cone(self.dim, gens=self.hrep, hrep=self.gens)
        return Cone(self.dim, hrep=self.gens)

    def project(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=float).reshape(self.dim)
        if self.gens is not None or self.dim <= ENUM_MAX_DIM:
            return project_onto_generated(self.generators(), w)
        # Moreau: w = P_K(w) + P_{K°}(w)
        return w - project_onto_generated(self.hrep, w)

    def distance(self, w) -> float:
        w = np.asarray(w, dtype=float).reshape(self.dim)
        return float(np.linalg.norm(w - self.project(w)))

    def contains(self, w, tol: float = 1e-9) -> bool:
        w = np.asarray(w, dtype=float).reshape(self.dim)
        if self.hrep is not None:
            scale = 1 + np.linalg.norm(w)
            return bool(np.all(self.hrep @ w <= tol * scale * (1 + np.linalg.norm(self.hrep, axis=1))))
        return self.distance(w) <= tol * (1 + np.linalg.norm(w))

    def is_zero(self) -> bool:
        return len(self.generators()) == 0

    def to_json(self) -> dict:
        return {"dim": self.dim, "generators": self.generators().tolist()}


def hrep_to_generators(G: np.ndarray) -> np.ndarray:
    """Generators of {w | G w <= 0} for dimension <= 3.

    The cone meets the box [-1, 1]^n in a polytope containing 0; its nonzero
    vertices generate the cone. Vertices are enumerated over n-subsets of the
    constraint and box hyperplanes.
    """
    G = np.asarray(G, dtype=float)
    n = G.shape[1]
    if n > ENUM_MAX_DIM:
        raise ValidationError(f"generator conversion is implemented for dimension <= {ENUM_MAX_DIM}, got {n}")
    G = G[np.linalg.norm(G, axis=1) > 0]
    G = G / np.linalg.norm(G, axis=1, keepdims=True) if len(G) else G
    rows = np.vstack([G, np.eye(n), -np.eye(n)])
    rhs = np.concatenate([np.zeros(len(G)), np.ones(2 * n)])
    verts = []
    for idx in itertools.combinations(range(len(rows)), n):
        M = rows[list(idx)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        v = np.linalg.solve(M, rhs[list(idx)])
        if np.all(rows @ v <= rhs + 1e-9) and np.linalg.norm(v) > 1e-9:
            verts.append(v)
    return prune_generators(_unit_rows(np.array(verts).reshape(-1, n)))


def prune_generators(V: np.ndarray) -> np.ndarray:
    """Drop generators that lie in the cone spanned by the remaining ones."""
    n = V.shape[1]
    keep = list(V)
    i = 0
    while i < len(keep):
        rest = np.array(keep[:i] + keep[i + 1:]).reshape(-1, n)
        if len(rest) and np.linalg.norm(keep[i] - project_onto_generated(rest, keep[i])) <= 1e-9:
            keep.pop(i)
        else:
            i += 1
    return np.array(keep).reshape(-1, n)


def project_onto_generated(V: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Euclidean projection of w onto cone(rows of V).

    Up to dimension 3 every subset of at most n generators is tried (the
    projection lies in the cone of an independent subset); beyond that the
    nonnegative least squares solver is used.
    """
    V = np.asarray(V, dtype=float)
    n = w.shape[0]
    if len(V) == 0:
        return np.zeros(n)
    if n > ENUM_MAX_DIM:
        lam, _ = nnls(V.T, w)
        return V.T @ lam
    best, best_r = np.zeros(n), float(np.linalg.norm(w))
    for k in range(1, n + 1):
        for idx in itertools.combinations(range(len(V)), k):
            B = V[list(idx)].T
            if np.linalg.matrix_rank(B, tol=1e-12) < k:
                continue
            lam, *_ = np.linalg.lstsq(B, w, rcond=None)
            if np.all(lam >= -1e-12):
                p = B @ np.maximum(lam, 0.0)
                r = float(np.linalg.norm(w - p))
                if r < best_r:
                    best, best_r = p, r
    return best


def tangent_cone_polyhedral(C: ConvexPolyhedron, x) -> Cone:
    """{w | a_i w <= 0 for active rows i}."""
    if not C.contains(x):
        raise ValidationError("point not in set")
    return Cone(C.dim, hrep=C.A[C.active(x)])


def normal_cone_polyhedral(C: ConvexPolyhedron, x) -> Cone:
    return regular_normal_cone(tangent_cone_polyhedral(C, x))


def regular_normal_cone(T: Cone) -> Cone:
    """Polar of a tangent cone."""
    return T.polar()


# --------------------------------------------------------------------------
# sampled cones


def direction_probes(dim: int, degrees: float = 1.0, norm: NormSpec | None = None) -> PointCloud:
    """Directions on the unit sphere of ``norm`` with roughly the given angular spacing."""
    if dim == 1:
        U = np.array([[-1.0], [1.0]])
    elif dim == 2:
        k = int(round(360 / degrees))
        t = 2 * np.pi * np.arange(k) / k
        U = np.stack([np.cos(t), np.sin(t)], axis=1)
    elif dim == 3:
        # Fibonacci lattice; area per point ~ (spacing in radians)^2
        k = int(math.ceil(4 * np.pi / math.radians(degrees) ** 2))
        i = np.arange(k) + 0.5
        z = 1 - 2 * i / k
        r = np.sqrt(1 - z * z)
        phi = np.pi * (1 + 5 ** 0.5) * i
        U = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    else:
        raise ValidationError("direction probes are available for dimension <= 3")
    U = np.round(U, 15) + 0.0
    if norm is not None:
        U = U / norm.rows(U)[:, None]
    return PointCloud(dim, U)


def _sample_spacing(P: np.ndarray) -> float:
    if len(P) < 2:
        return 0.0
    d, _ = cKDTree(P).query(P, k=2)
    return float(np.median(d[:, 1]))


def tangent_cone_sampled(C: PointCloud, x, nu_schedule: Sequence[float], probes: PointCloud | None = None,
                         tol: float | None = None, norm: NormSpec | None = None) -> PointCloud:
    """Probe directions in the outer-limit estimate of ν(C - x) along the schedule."""
    norm = norm or NormSpec.euclidean()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (C.dim,):
        raise DimensionMismatch("point and cloud dimensions differ")
    probes = probes or direction_probes(C.dim, norm=norm)
    nus = [float(v) for v in nu_schedule]
    if not nus:
        raise ValidationError("nu_schedule is empty")
    s = _sample_spacing(C.points)
    if tol is None:
        # half the probe spacing, unless the finest magnified sample is coarser
        tol = max(0.5 * _sample_spacing(probes.points), s * min(nus))
    d0 = norm.rows(C.points - x).min() if len(C) else np.inf
    if d0 > tol / max(nus):
        raise ValidationError("point not within tolerance of the sampled set")
    rad = max(norm.rows(probes.points).max(), 1.0) + tol

    def gen(k):
        nu = nus[k - 1]
        D = C.points - x
        near = norm.rows(D) <= rad / nu
        return PointCloud(C.dim, nu * D[near])

    seq = SetSequence(C.dim, gen)
    return limit_estimate(seq, len(nus), probes, tol, "outer", norm=norm).candidate


def _local_normals(P: np.ndarray, tree: cKDTree, i: int, U: np.ndarray, t: float, slack: float) -> np.ndarray:
    nb = tree.query_ball_point(P[i], t)
    D = P[nb] - P[i]
    r = np.linalg.norm(D, axis=1)
    D = D[r > 0] / r[r > 0, None]
    if len(D) == 0:
        return U
    return U[(D @ U.T).max(axis=0) <= slack]


def limiting_normal_cone_sampled(C: PointCloud, x, approach_schedule: Sequence[float] | None = None,
                                 tol: float = 0.01, probes: PointCloud | None = None,
                                 local_radius: float | None = None) -> PointCloud:
    """Unit directions in the outer-limit estimate of sampled regular normals near x.

    At each sample point c near x, a probe v counts as a regular normal when
    <v, (c' - c)/|c' - c|> <= tol for every sample c' within ``local_radius``
    of c. Index k of the sequence collects these directions over samples
    within ``approach_schedule[k]`` of x (x itself included). An empty result
    means the cone is {0}.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (C.dim,):
        raise DimensionMismatch("point and cloud dimensions differ")
    P = C.points
    s = _sample_spacing(P)
    t = local_radius or 3 * s
    if approach_schedule is None:
        approach_schedule = [12 * t, 8 * t, 5 * t]
    radii = [float(r) for r in approach_schedule]
    probes = probes or direction_probes(C.dim)
    U = probes.points / np.linalg.norm(probes.points, axis=1, keepdims=True)
    tree = cKDTree(P)
    near_idx = tree.query_ball_point(x, max(radii))
    if len(near_idx) < 2:
        raise ValidationError("insufficient samples near the point")
    near_idx = np.array(sorted(near_idx))
    dist = np.linalg.norm(P[near_idx] - x, axis=1)
    cache = {}

    def normals_at(i):
        if i not in cache:
            cache[i] = _local_normals(P, tree, i, U, t, tol)
        return cache[i]

    def gen(k):
        r = radii[k - 1]
        chunks = [normals_at(i) for i in near_idx[dist <= r]]
        chunks = [c for c in chunks if len(c)]
        if not chunks:
            return PointCloud.empty(C.dim)
        return PointCloud(C.dim, np.vstack(chunks)).dedup()

    seq = SetSequence(C.dim, gen)
    # tail = the smaller radii
    # match at half the slack so the slack is not applied twice
    return limit_estimate(seq, len(radii), PointCloud(C.dim, U), tol / 2, "outer").candidate


def cone_probe_agreement(cone: Cone, kept: PointCloud, probes: PointCloud) -> float:
    """Largest angular error (degrees) between a sampled cone and an exact one.

    Kept probes are measured by their angle to the exact cone; probes inside
    the exact cone by their angle to the nearest kept probe.
    """
    worst = 0.0
    for u in kept.points:
        u = u / np.linalg.norm(u)
        d = min(cone.distance(u), 1.0)
        worst = max(worst, math.degrees(math.asin(d)))
    K = kept.points / np.linalg.norm(kept.points, axis=1, keepdims=True) if len(kept) else kept.points
    for u in probes.points:
        u = u / np.linalg.norm(u)
        if cone.distance(u) <= 1e-12:
            if len(K) == 0:
                return 180.0
            c = np.clip((K @ u).max(), -1, 1)
            worst = max(worst, math.degrees(math.acos(c)))
    return worst


# --------------------------------------------------------------------------
# one-dimensional subgradients


Piece = tuple  # (value function, derivative function), both vectorized


@dataclass
class PiecewiseSmooth1D:
    """Piecewise-smooth f: R -> (-inf, inf].

    ``pieces[i]`` covers the open interval between breakpoints i-1 and i
    (unbounded at the ends). The value at a breakpoint is the minimum of the
    two one-sided limits and the optional explicit value, which makes f lsc.
    """

    breakpoints: tuple
    pieces: tuple
    point_values: dict = field(default_factory=dict)
    label: str = ""

    def __post_init__(self):
        self.breakpoints = tuple(float(b) for b in self.breakpoints)
        self.pieces = tuple(self.pieces)
        if list(self.breakpoints) != sorted(set(self.breakpoints)):
            raise ValidationError("breakpoints must be strictly increasing")
        if len(self.pieces) != len(self.breakpoints) + 1:
            raise ValidationError("need one piece per interval between breakpoints")

    @classmethod
    def smooth(cls, f: Callable, df: Callable, label: str = "") -> "PiecewiseSmooth1D":
        return cls((), ((f, df),), {}, label)

    @classmethod
    def kink(cls, at: float, left: Piece, right: Piece, label: str = "") -> "PiecewiseSmooth1D":
        return cls((at,), (left, right), {}, label)

    @classmethod
    def two_slopes(cls, at: float, s_left: float, s_right: float, value: float = 0.0) -> "PiecewiseSmooth1D":
        """Continuous piecewise-linear function with one kink."""
        return cls.kink(at, _line(value, at, s_left), _line(value, at, s_right), f"kink({s_left},{s_right})")

    def _piece_index(self, x: np.ndarray) -> np.ndarray:
        return np.searchsorted(np.array(self.breakpoints), x, side="left")

    def _one_sided(self, i: int, b: float) -> tuple[float, float, float, float]:
        fl, dfl = self.pieces[i]
        fr, dfr = self.pieces[i + 1]
        xb = np.array([b])
        return float(fl(xb)[0]), float(fr(xb)[0]), float(dfl(xb)[0]), float(dfr(xb)[0])

    def value(self, x: float) -> float:
        return float(self.values(np.array([x], dtype=float))[0])

    def values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        out = np.empty_like(x)
        idx = self._piece_index(x)
        bp = np.array(self.breakpoints)
        for i, (f, _) in enumerate(self.pieces):
            sel = idx == i
            if sel.any():
                out[sel] = f(x[sel])
        for i, b in enumerate(bp):
            sel = x == b
            if sel.any():
                L, R, _, _ = self._one_sided(i, b)
                out[sel] = min(L, R, self.point_values.get(b, math.inf))
        return out

    def derivative(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).ravel()
        out = np.empty_like(x)
        idx = self._piece_index(x)
        for i, (_, df) in enumerate(self.pieces):
            sel = idx == i
            if sel.any():
                out[sel] = df(x[sel])
        return out

    def field(self):
        from .fields import ScalarField
        return ScalarField(1, lambda X: self.values(X[:, 0]), None, self.label or "piecewise")


def _line(value, at, slope):
    return (lambda x: value + slope * (np.asarray(x, dtype=float) - at),
            lambda x: np.full(np.shape(x), float(slope)))


@dataclass(frozen=True)
class SubgradientSet:
    """Union of closed intervals and isolated slopes (bounds may be ±inf)."""

    intervals: tuple = ()
    points: tuple = ()

    def contains(self, v: float, tol: float = 0.0) -> bool:
        return self.distance(v) <= tol

    def distance(self, v: float) -> float:
        d = math.inf
        for lo, hi in self.intervals:
            d = min(d, max(lo - v, 0.0, v - hi))
        for p in self.points:
            d = min(d, abs(v - p))
        return d

    def normal_directions(self) -> list:
        """Epigraph normal representatives (v, -1), one per endpoint or point."""
        out = [(p, -1.0) for p in self.points]
        for lo, hi in self.intervals:
            out += [(e, -1.0) for e in (lo, hi) if math.isfinite(e)]
        return out

    def __repr__(self):
        parts = [f"[{lo:g}, {hi:g}]" for lo, hi in self.intervals] + [f"{{{p:g}}}" for p in self.points]
        return " ∪ ".join(parts) or "∅"


def subdifferential_1d(f: PiecewiseSmooth1D, x: float) -> SubgradientSet:
    """Subgradients at x from the epigraph normals (v, -1).

    Smooth point: {f'(x)}. Continuous kink with slopes s- <= s+: [s-, s+];
    with s- > s+: {s-, s+}. A side where f jumps up away from f(x) imposes
    no constraint, leaving a half-line.
    """
    x = float(x)
    fx = f.value(x)
    if not math.isfinite(fx):
        raise ValidationError(f"f(x) = {fx} is not finite")
    if x not in f.breakpoints:
        return SubgradientSet(points=(float(f.derivative([x])[0]),))
    i = f.breakpoints.index(x)
    L, R, sl, sr = f._one_sided(i, x)
    scale = 1e-12 * (1 + abs(fx))
    left_attached = L <= fx + scale
    right_attached = R <= fx + scale
    if left_attached and right_attached:
        if sl <= sr:
            return SubgradientSet(intervals=((sl, sr),)) if sl < sr else SubgradientSet(points=(sl,))
        return SubgradientSet(points=(sl, sr))
    if left_attached:
        return SubgradientSet(intervals=((sl, math.inf),))
    if right_attached:
        return SubgradientSet(intervals=((-math.inf, sr),))
    return SubgradientSet(intervals=((-math.inf, math.inf),))


def fermat_residual_1d(f: PiecewiseSmooth1D, x: float) -> float:
    """dist(0, ∂f(x))."""
    return subdifferential_1d(f, x).distance(0.0)


def optimality_residual(grad_f, C: ConvexPolyhedron, x) -> float:
    """dist_2(-∇f(x), N_C(x)) for a polyhedron C."""
    if not C.contains(x):
        raise ValidationError("point not in set")
    g = np.asarray(grad_f(np.asarray(x, dtype=float)) if callable(grad_f) else grad_f, dtype=float).reshape(C.dim)
    N = normal_cone_polyhedral(C, x)
    return N.distance(-g)
