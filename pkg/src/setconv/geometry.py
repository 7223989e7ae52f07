"""Norms, point clouds and the three distance primitives.

Sets are finite point clouds. Distances are exact minima/maxima over the
clouds; the brute-force double loop in :func:`nearest_distances` is the
reference and the KD-tree path must return bit-identical values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DimensionMismatch, ValidationError

INF = math.inf

# Extended reals are plain Python floats: +inf and -inf order correctly
# against every finite value. NaN never enters (rejected at construction).
ExtReal = float


def ext_add(a: float, b: float) -> float:
    """Sum in [-inf, inf] with the inf-addition rule ``inf + (-inf) = inf``.

    For r > -inf, ``r + inf = inf``; for r < inf, ``r + (-inf) = -inf``.
    """
    if math.isinf(a) and math.isinf(b) and a != b:
        return INF
    return a + b


# --------------------------------------------------------------------------
# norms


_KINDS = {"euclidean", "max", "product"}


@dataclass(frozen=True)
class NormSpec:
    """A norm on R^n.

    ``product`` combines ordered blocks ``(block_dim, NormSpec)`` by taking the
    maximum of the block norms, e.g. ``max{||x||_2, |alpha|}`` on R^n x R.
    """

    kind: str = "euclidean"
    blocks: tuple = ()

    def __post_init__(self):
        kind = "product" if self.kind == "weighted-product" else self.kind
        if kind not in _KINDS:
            raise ValidationError(f"unknown norm kind {self.kind!r}")
        object.__setattr__(self, "kind", kind)
        if kind == "product":
            if not self.blocks:
                raise ValidationError("product norm needs at least one block")
            blocks = []
            for d, spec in self.blocks:
                if int(d) != d or d < 1:
                    raise ValidationError(f"block dimension must be a positive integer, got {d!r}")
                if not isinstance(spec, NormSpec):
                    raise ValidationError("block norm must be a NormSpec")
                if spec.dim is not None and spec.dim != d:
                    raise ValidationError("nested product block dimensions do not sum to block size")
                blocks.append((int(d), spec))
            object.__setattr__(self, "blocks", tuple(blocks))
        elif self.blocks:
            raise ValidationError(f"{kind} norm takes no blocks")

    @classmethod
    def euclidean(cls) -> "NormSpec":
        return cls("euclidean")

    @classmethod
    def max_norm(cls) -> "NormSpec":
        return cls("max")

    @classmethod
    def product(cls, *blocks) -> "NormSpec":
        return cls("product", tuple(blocks))

    @property
    def dim(self) -> int | None:
        """Ambient dimension for product norms, None when any dimension works."""
        if self.kind != "product":
            return None
        return sum(d for d, _ in self.blocks)

    def check_dim(self, n: int) -> None:
        if self.dim is not None and self.dim != n:
            raise DimensionMismatch(f"norm is defined on R^{self.dim}, operands live in R^{n}")

    def rows(self, diff: np.ndarray) -> np.ndarray:
        """Norm of every row of a (k, n) array.

        Each row is reduced with a fixed sequence of elementwise operations,
        so a row's value never depends on which other rows share the array.
        """
        diff = np.asarray(diff, dtype=float)
        n = diff.shape[-1]
        self.check_dim(n)
        if n == 1:
            return np.abs(diff[..., 0])
        if self.kind == "euclidean":
            acc = diff[..., 0] * diff[..., 0]
            for j in range(1, n):
                acc = acc + diff[..., j] * diff[..., j]
            return np.sqrt(acc)
        if self.kind == "max":
            return np.max(np.abs(diff), axis=-1)
        out = None
        start = 0
        for d, spec in self.blocks:
            part = spec.rows(diff[..., start:start + d])
            out = part if out is None else np.maximum(out, part)
            start += d
        return out

    def __call__(self, v) -> float:
        v = np.atleast_1d(np.asarray(v, dtype=float))
        return float(self.rows(v[None, :])[0])

    def is_max_like(self, n: int) -> bool:
        """True when this norm coincides with the max norm on R^n."""
        if n == 1 or self.kind == "max":
            return True
        if self.kind == "euclidean":
            return False
        return all(spec.is_max_like(d) for d, spec in self.blocks)

    def equivalence(self, p: float, n: int) -> tuple[float, float]:
        """Constants (lo, hi) with lo*|v|_p <= N(v) <= hi*|v|_p on R^n, p in {2, inf}."""
        if n == 1:
            return 1.0, 1.0
        if self.kind == "euclidean":
            return (1.0, 1.0) if p == 2 else (1.0, math.sqrt(n))
        if self.kind == "max":
            return (1.0 / math.sqrt(n), 1.0) if p == 2 else (1.0, 1.0)
        los, his = zip(*(spec.equivalence(p, d) for d, spec in self.blocks))
        if p == 2:
            return min(los) / math.sqrt(len(self.blocks)), max(his)
        return min(los), max(his)

    def to_json(self) -> dict:
        if self.kind == "product":
            return {"kind": "product", "blocks": [[d, s.to_json()] for d, s in self.blocks]}
        return {"kind": self.kind}

    @classmethod
    def from_json(cls, obj) -> "NormSpec":
        if isinstance(obj, str):
            obj = {"kind": obj}
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ValidationError("field 'kind': norm spec must be an object with a 'kind'")
        kind = obj["kind"]
        if kind in ("product", "weighted-product"):
            raw = obj.get("blocks")
            if not isinstance(raw, list) or not raw:
                raise ValidationError("field 'blocks': product norm needs a non-empty list")
            blocks = []
            for i, item in enumerate(raw):
                if not isinstance(item, (list, tuple)) or len(item) != 2:
                    raise ValidationError(f"field 'blocks[{i}]': expected [dim, spec]")
                blocks.append((item[0], cls.from_json(item[1])))
            return cls("product", tuple(blocks))
        if kind not in _KINDS:
            raise ValidationError(f"field 'kind': unknown norm kind {kind!r}")
        return cls(kind)


def product_norm(first_dim: int, first: NormSpec, second_dim: int, second: NormSpec | None = None) -> NormSpec:
    """``max{||x||_first, ||y||_second}`` on R^first_dim x R^second_dim."""
    return NormSpec.product((first_dim, first), (second_dim, second or NormSpec.euclidean()))


def epi_norm(n: int, norm: NormSpec | None = None) -> NormSpec:
    """The product norm ``max{||x||, |alpha|}`` on R^n x R used for epigraphs."""
    return product_norm(n, norm or NormSpec.euclidean(), 1, NormSpec.euclidean())


# --------------------------------------------------------------------------
# point clouds


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Finite subset of R^dim; possibly empty, duplicates allowed."""

    dim: int
    points: np.ndarray = field(default=None)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValidationError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))
        pts = np.zeros((0, self.dim)) if self.points is None else np.asarray(self.points, dtype=float)
        if pts.size == 0:
            pts = np.zeros((0, self.dim))
        elif pts.ndim == 1 and self.dim == 1:
            pts = pts.reshape(-1, 1)
        elif pts.ndim == 1 and pts.shape[0] == self.dim:
            pts = pts.reshape(1, -1)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise DimensionMismatch(f"points must have length {self.dim}, got shape {pts.shape}")
        if np.isnan(pts).any():
            raise ValidationError("NaN coordinates are not allowed in a point cloud")
        if np.isinf(pts).any():
            raise ValidationError("infinite coordinates are not allowed in a point cloud")
        # -0.0 -> 0.0 so that exact row matching treats them as equal
        pts = pts + 0.0
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def empty(cls, dim: int) -> "PointCloud":
        return cls(dim, np.zeros((0, dim)))

    @classmethod
    def of(cls, points) -> "PointCloud":
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        return cls(pts.shape[1], pts)

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    def __repr__(self):
        return f"PointCloud(dim={self.dim}, n={len(self)})"

    def dedup(self) -> "PointCloud":
        if self.is_empty:
            return self
        return PointCloud(self.dim, np.unique(self.points, axis=0))

    def union(self, other: "PointCloud") -> "PointCloud":
        _check_same_dim(self, other)
        return PointCloud(self.dim, np.vstack([self.points, other.points]))

    def intersect(self, other: "PointCloud") -> "PointCloud":
        """Points of self that occur exactly (bitwise) in other."""
        _check_same_dim(self, other)
        if self.is_empty or other.is_empty:
            return PointCloud.empty(self.dim)
        return PointCloud(self.dim, self.points[rows_in(self.points, other.points)]).dedup()

    def contains_exact(self, other: "PointCloud") -> bool:
        _check_same_dim(self, other)
        return bool(rows_in(other.points, self.points).all()) if len(other) else True

    def affine(self, scale: float = 1.0, shift=None) -> "PointCloud":
        """The cloud ``scale * (C - shift)``."""
        pts = self.points if shift is None else self.points - np.asarray(shift, dtype=float)
        return PointCloud(self.dim, scale * pts)

    def swap_blocks(self, split: int) -> "PointCloud":
        """(x, y) -> (y, x) where x holds the first ``split`` coordinates."""
        return PointCloud(self.dim, np.hstack([self.points[:, split:], self.points[:, :split]]))

    def to_json(self) -> dict:
        return {"dim": self.dim, "points": self.points.tolist()}

    @classmethod
    def from_json(cls, obj) -> "PointCloud":
        if not isinstance(obj, dict):
            raise ValidationError("point cloud must be a JSON object")
        if "dim" not in obj:
            raise ValidationError("field 'dim': missing")
        dim = obj["dim"]
        if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
            raise ValidationError(f"field 'dim': expected a positive integer, got {dim!r}")
        pts = obj.get("points")
        if not isinstance(pts, list):
            raise ValidationError("field 'points': expected a list of coordinate lists")
        for i, p in enumerate(pts):
            if not isinstance(p, list) or len(p) != dim:
                raise ValidationError(f"field 'points[{i}]': expected {dim} coordinates")
            for v in p:
                if not isinstance(v, (int, float)) or isinstance(v, bool):
                    raise ValidationError(f"field 'points[{i}]': non-numeric coordinate {v!r}")
        try:
            return cls(dim, np.array(pts, dtype=float).reshape(len(pts), dim))
        except ValidationError as exc:
            raise ValidationError(f"field 'points': {exc}") from None


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float
    norm: NormSpec = field(default_factory=NormSpec.euclidean)

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValidationError("ball radius must be nonnegative")
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float).reshape(-1, self.center.shape[0])
        return self.norm.rows(points - self.center) <= self.radius


def _check_same_dim(C: PointCloud, D: PointCloud) -> None:
    if C.dim != D.dim:
        raise DimensionMismatch(f"incompatible operands: R^{C.dim} vs R^{D.dim}")


def rows_in(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Boolean mask: which rows of ``a`` occur bitwise in ``b``."""
    a = np.ascontiguousarray(np.asarray(a, dtype=float) + 0.0)
    b = np.ascontiguousarray(np.asarray(b, dtype=float) + 0.0)
    if len(a) == 0 or len(b) == 0:
        return np.zeros(len(a), dtype=bool)
    vt = np.dtype((np.void, a.dtype.itemsize * a.shape[1]))
    return np.isin(a.view(vt).ravel(), b.view(vt).ravel())


# --------------------------------------------------------------------------
# distance kernels

_KD_NEIGHBORS = 8


def brute_nearest(src: np.ndarray, tgt: np.ndarray, norm: NormSpec) -> np.ndarray:
    """min_j norm(src_i - tgt_j) for every i by the O(|src|*|tgt|) double loop."""
    src = np.asarray(src, dtype=float)
    tgt = np.asarray(tgt, dtype=float)
    out = np.empty(len(src))
    if len(tgt) == 0:
        out.fill(INF)
        return out
    chunk = max(1, int(4_000_000 // max(1, len(tgt) * src.shape[1])))
    for s in range(0, len(src), chunk):
        block = src[s:s + chunk]
        d = norm.rows(block[:, None, :] - tgt[None, :, :])
        out[s:s + chunk] = d.min(axis=1)
    return out


def tree_nearest(src: np.ndarray, tgt: np.ndarray, norm: NormSpec) -> np.ndarray:
    """Same values as :func:`brute_nearest`, using a KD-tree to prune candidates.

    Every returned value is recomputed with ``norm.rows`` over a candidate set
    guaranteed to contain all exact minimizers, so the result matches the
    double loop bit-for-bit.
    """
    src = np.asarray(src, dtype=float)
    tgt = np.asarray(tgt, dtype=float)
    n = src.shape[1]
    out = np.empty(len(src))
    if len(tgt) == 0:
        out.fill(INF)
        return out
    if len(src) == 0:
        return out
    hit = rows_in(src, tgt)
    out[hit] = 0.0
    todo = np.flatnonzero(~hit)
    if len(todo) == 0:
        return out
    q = src[todo]
    tree = cKDTree(tgt)
    if norm.is_max_like(n):
        # cKDTree's p=inf metric is max|a_i - b_i|, the same operations as the
        # kernel, so its nearest neighbour is an exact minimizer.
        _, idx = tree.query(q, k=1, p=np.inf)
        out[todo] = norm.rows(q - tgt[idx])
        return out
    p = 2
    lo, _ = norm.equivalence(p, n)
    k = min(_KD_NEIGHBORS, len(tgt))
    dkd, idx = tree.query(q, k=k, p=p)
    if k == 1:
        dkd, idx = dkd[:, None], idx[:, None]
    exact = norm.rows(q[:, None, :] - tgt[idx])
    best = exact.min(axis=1)
    radius = best / lo * (1 + 1e-9) + 1e-300
    if k < len(tgt):
        # rows where a point outside the k candidates could still tie or win
        for i in np.flatnonzero(dkd[:, -1] <= radius):
            cand = tree.query_ball_point(q[i], r=radius[i], p=p)
            best[i] = norm.rows(q[i] - tgt[cand]).min()
    out[todo] = best
    return out


def nearest_distances(src: np.ndarray, tgt: np.ndarray, norm: NormSpec, method: str = "auto") -> np.ndarray:
    if method == "brute":
        return brute_nearest(src, tgt, norm)
    if method == "tree":
        return tree_nearest(src, tgt, norm)
    if method != "auto":
        raise ValidationError(f"unknown method {method!r}")
    if len(src) * len(tgt) <= 40_000:
        return brute_nearest(src, tgt, norm)
    return tree_nearest(src, tgt, norm)


# --------------------------------------------------------------------------
# distance primitives


def point_to_set_distance(x, C: PointCloud, norm: NormSpec | None = None) -> float:
    """dist(x, C) = min_{c in C} ||x - c||; +inf for the empty cloud."""
    norm = norm or NormSpec.euclidean()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if C.is_empty:
        return INF
    if x.shape != (C.dim,):
        raise DimensionMismatch(f"point has dimension {x.shape[0]}, cloud has {C.dim}")
    return float(norm.rows(C.points - x).min())


def excess(C: PointCloud, D: PointCloud, norm: NormSpec | None = None, method: str = "auto") -> float:
    """exs(C; D): sup over C of dist(., D), +inf if only D is empty, 0 if C is empty."""
    norm = norm or NormSpec.euclidean()
    if not C.is_empty and not D.is_empty:
        _check_same_dim(C, D)
    if C.is_empty:
        return 0.0
    if D.is_empty:
        return INF
    return float(nearest_distances(C.points, D.points, norm, method).max())


def truncate(C: PointCloud, rho: float, norm: NormSpec | None = None, center=None) -> PointCloud:
    """Points of C within distance rho of ``center`` (origin by default)."""
    norm = norm or NormSpec.euclidean()
    if rho < 0:
        raise ValidationError("truncation radius must be nonnegative")
    if C.is_empty:
        return C
    c = np.zeros(C.dim) if center is None else np.atleast_1d(np.asarray(center, dtype=float))
    if c.shape != (C.dim,):
        raise DimensionMismatch("truncation center has the wrong dimension")
    return PointCloud(C.dim, C.points[norm.rows(C.points - c) <= rho])


@dataclass
class HausdorffDetail:
    value: float
    excess_cd: float
    excess_dc: float
    n_c: int
    n_d: int

    @property
    def empty_window(self) -> bool:
        """Both truncations empty: the distance is 0 by convention, not by proximity."""
        return self.n_c == 0 and self.n_d == 0


def truncated_hausdorff_detail(C: PointCloud, D: PointCloud, rho: float, norm: NormSpec | None = None,
                               center=None, method: str = "auto") -> HausdorffDetail:
    norm = norm or NormSpec.euclidean()
    if not C.is_empty and not D.is_empty:
        _check_same_dim(C, D)
    Ct = truncate(C, rho, norm, center)
    Dt = truncate(D, rho, norm, center)
    e1 = excess(Ct, D, norm, method)
    e2 = excess(Dt, C, norm, method)
    return HausdorffDetail(max(e1, e2), e1, e2, len(Ct), len(Dt))


def truncated_hausdorff(C: PointCloud, D: PointCloud, rho: float, norm: NormSpec | None = None,
                        center=None, method: str = "auto") -> float:
    """max{exs(C ∩ B(center, rho); D), exs(D ∩ B(center, rho); C)}."""
    return truncated_hausdorff_detail(C, D, rho, norm, center, method).value


def interval_sample(lo: float, hi: float, h: float) -> np.ndarray:
    """Points of [lo, hi] at spacing <= h, endpoints included."""
    if hi < lo:
        return np.zeros(0)
    if hi == lo:
        return np.array([float(lo)])
    k = max(1, int(math.ceil((hi - lo) / h - 1e-9)))
    i = np.arange(k + 1)
    return (lo * (k - i) + hi * i) / k


def lattice(lo: float, hi: float, h: float, anchor: float = 0.0) -> np.ndarray:
    """Points ``anchor + j*h`` lying in [lo, hi].

    Sequences sampled with a common lattice share coordinates bitwise, which
    is what exact intersections of sampled sets rely on.
    """
    j0 = int(math.ceil((lo - anchor) / h - 1e-9))
    j1 = int(math.floor((hi - anchor) / h + 1e-9))
    if j1 < j0:
        return np.zeros(0)
    return anchor + np.arange(j0, j1 + 1) * h


def as_cloud(points: Sequence | np.ndarray, dim: int | None = None) -> PointCloud:
    pts = np.asarray(points, dtype=float)
    if dim is None:
        dim = 1 if pts.ndim <= 1 else pts.shape[1]
    return PointCloud(dim, pts.reshape(-1, dim) if pts.size else np.zeros((0, dim)))
