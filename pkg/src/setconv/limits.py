"""Finite surrogates for inner and outer limits of set sequences.

A sequence is only observed at indices ``1..nu_max``. A probe belongs to the
inner estimate when every set in the tail window comes within ``tol`` of it,
and to the outer estimate when at least one of them does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, ValidationError
from .geometry import INF, NormSpec, PointCloud, nearest_distances, truncated_hausdorff


@dataclass
class SetSequence:
    """Deterministic index -> PointCloud generator.

    ``spacing`` is the sample spacing of the generated clouds, when known; it
    feeds the default tolerance.
    """

    dim: int
    generator: Callable[[int], PointCloud]
    spacing: float | None = None
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __call__(self, nu: int) -> PointCloud:
        if nu < 1:
            raise ValidationError("sequence indices start at 1")
        if nu not in self._cache:
            C = self.generator(nu)
            if C.dim != self.dim:
                raise DimensionMismatch(f"generator returned dimension {C.dim} at index {nu}, expected {self.dim}")
            self._cache[nu] = C
        return self._cache[nu]

    def map(self, fn: Callable[[PointCloud], PointCloud], dim: int | None = None, label: str = "") -> "SetSequence":
        return SetSequence(dim or self.dim, lambda nu: fn(self(nu)), self.spacing, label)


def union_sequence(a: SetSequence, b: SetSequence) -> SetSequence:
    return SetSequence(a.dim, lambda nu: a(nu).union(b(nu)), _max_spacing(a, b), "union")


def intersection_sequence(a: SetSequence, b: SetSequence) -> SetSequence:
    """ν -> C^ν ∩ D^ν by exact point matching; never by proximity."""
    return SetSequence(a.dim, lambda nu: a(nu).intersect(b(nu)), _max_spacing(a, b), "intersection")


def _max_spacing(a, b):
    vals = [s for s in (a.spacing, b.spacing) if s is not None]
    return max(vals) if vals else None


def probe_spacing(probes: PointCloud) -> float:
    """Largest over coordinates of the smallest positive gap between probe values."""
    gaps = []
    for j in range(probes.dim):
        u = np.unique(probes.points[:, j])
        if len(u) > 1:
            gaps.append(float(np.diff(u).min()))
    return max(gaps) if gaps else 0.0


def default_tolerance(probes: PointCloud, set_spacing: float | None = None) -> float:
    tol = 3.0 * max(probe_spacing(probes), set_spacing or 0.0)
    if tol <= 0:
        raise ValidationError("cannot derive a tolerance: give tol explicitly")
    return tol


def tail_window(nu_max: int, tail_start: int | None = None) -> range:
    if nu_max < 1:
        raise ValidationError("nu_max must be at least 1")
    start = max(1, math.ceil(nu_max / 2)) if tail_start is None else int(tail_start)
    if not 1 <= start <= nu_max:
        raise ValidationError(f"tail_start must lie in [1, {nu_max}]")
    return range(start, nu_max + 1)


@dataclass
class LimitEstimate:
    candidate: PointCloud
    tail_start: int
    tolerance: float
    probe_grid: PointCloud
    nu_max: int
    kind: str

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValidationError("tolerance must be positive")
        if self.tail_start < 1:
            raise ValidationError("tail_start must be >= 1")


def _tail_distances(seq: SetSequence, probes: PointCloud, window: range, norm: NormSpec) -> np.ndarray:
    if probes.is_empty:
        raise ValidationError("probe grid is empty")
    if probes.dim != seq.dim:
        raise DimensionMismatch(f"probes live in R^{probes.dim}, sequence in R^{seq.dim}")
    out = np.empty((len(window), len(probes)))
    for k, nu in enumerate(window):
        C = seq(nu)
        out[k] = INF if C.is_empty else nearest_distances(probes.points, C.points, norm)
    return out


def limit_estimate(seq: SetSequence, nu_max: int, probes: PointCloud, tol: float | None = None, kind: str = "inner",
                   tail_start: int | None = None, norm: NormSpec | None = None) -> LimitEstimate:
    norm = norm or NormSpec.euclidean()
    window = tail_window(nu_max, tail_start)
    if tol is None:
        tol = default_tolerance(probes, seq.spacing)
    d = _tail_distances(seq, probes, window, norm)
    if kind == "inner":
        keep = d.max(axis=0) <= tol
    elif kind == "outer":
        keep = d.min(axis=0) <= tol
    else:
        raise ValidationError(f"kind must be 'inner' or 'outer', got {kind!r}")
    return LimitEstimate(PointCloud(probes.dim, probes.points[keep]), window.start, float(tol), probes, nu_max, kind)


def inner_limit_estimate(seq: SetSequence, nu_max: int, probes: PointCloud, tol: float | None = None,
                         tail_start: int | None = None, norm: NormSpec | None = None) -> PointCloud:
    """Probes within ``tol`` of every tail set."""
    return limit_estimate(seq, nu_max, probes, tol, "inner", tail_start, norm).candidate


def outer_limit_estimate(seq: SetSequence, nu_max: int, probes: PointCloud, tol: float | None = None,
                         tail_start: int | None = None, norm: NormSpec | None = None) -> PointCloud:
    """Probes within ``tol`` of at least one tail set."""
    return limit_estimate(seq, nu_max, probes, tol, "outer", tail_start, norm).candidate


@dataclass
class ConvergenceReport:
    probes: PointCloud
    nu_schedule: list
    dist_seq: np.ndarray        # (len(nu_schedule), n_probes)
    dist_limit: np.ndarray      # (n_probes,)
    tol: float
    dl_table: dict              # rho -> list of dl values along nu_schedule

    @property
    def deviation(self) -> np.ndarray:
        with np.errstate(invalid="ignore"):
            dev = np.abs(self.dist_seq - self.dist_limit[None, :])
        # inf - inf only arises when both sets are empty, which never matches a
        # nonempty limit; treat it as an infinite deviation
        return np.where(np.isnan(dev), INF, dev)

    @property
    def max_tail_deviation(self) -> np.ndarray:
        """Per probe, the largest deviation over the second half of the schedule."""
        k = len(self.nu_schedule)
        return self.deviation[k // 2:].max(axis=0)

    @property
    def final_deviation(self) -> float:
        return float(self.deviation[-1].max())

    @property
    def verdict(self) -> bool:
        return self.final_deviation <= self.tol

    def rows(self):
        """(probe coords..., nu, dist_seq, dist_limit, deviation) rows, nu-major."""
        dev = self.deviation
        for k, nu in enumerate(self.nu_schedule):
            for i, x in enumerate(self.probes.points):
                yield (*x.tolist(), nu, float(self.dist_seq[k, i]), float(self.dist_limit[i]), float(dev[k, i]))

    def header(self):
        return [f"x{j}" for j in range(self.probes.dim)] + ["nu", "dist_seq", "dist_limit", "deviation"]


def set_convergence_report(seq: SetSequence, C: PointCloud, probes: PointCloud, nu_schedule: Sequence[int],
                           tol: float | None = None, rhos: Sequence[float] = (), norm: NormSpec | None = None
                           ) -> ConvergenceReport:
    """Tabulate |dist(x, C^ν) - dist(x, C)| over probes and the schedule, plus dl_ρ(C^ν, C)."""
    norm = norm or NormSpec.euclidean()
    if C.is_empty:
        raise ValidationError("the limit set must be nonempty")
    if C.dim != seq.dim:
        raise DimensionMismatch("limit set and sequence dimensions differ")
    nu_schedule = [int(nu) for nu in nu_schedule]
    if not nu_schedule:
        raise ValidationError("nu_schedule is empty")
    if tol is None:
        tol = default_tolerance(probes, seq.spacing)
    d = _tail_distances(seq, probes, nu_schedule, norm)
    dl = nearest_distances(probes.points, C.points, norm)
    table = {float(r): [truncated_hausdorff(seq(nu), C, r, norm) for nu in nu_schedule] for r in rhos}
    return ConvergenceReport(probes, nu_schedule, d, dl, float(tol), table)
