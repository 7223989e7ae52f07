"""Location-mixture density estimation over nested center sets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import qmc

from .epi import epi_distance
from .errors import NumericalFailure, ValidationError
from .fields import GridSpec, ScalarField

LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


def gaussian_kernel(diff: np.ndarray) -> np.ndarray:
    """Standard normal density in m dimensions, evaluated on the last axis of ``diff``."""
    m = diff.shape[-1]
    return np.exp(-0.5 * np.sum(diff * diff, axis=-1) - m * LOG_SQRT_2PI)


def nested_centers(count: int, box: Sequence[tuple[float, float]]) -> np.ndarray:
    """The first ``count`` points of an unscrambled Halton sequence mapped into ``box``.

    Prefixes of the sequence are nested, so the center set for ν is a subset
    of the set for any larger count, and the union is dense in the box.
    """
    if count < 1:
        raise ValidationError("center count must be at least 1")
    lo = np.array([b[0] for b in box], dtype=float)
    hi = np.array([b[1] for b in box], dtype=float)
    if np.any(hi <= lo):
        raise ValidationError("center box must have lo < hi in every coordinate")
    u = qmc.Halton(d=len(box), scramble=False).random(count)
    # the unscrambled sequence starts at the origin of the unit cube; shifting by
    # one half puts the first center at the box midpoint
    u = (u + 0.5) % 1.0
    return lo + u * (hi - lo)


def mixture_objective(mu: np.ndarray, K: np.ndarray) -> float:
    """-(1/n) Σ_j ln Σ_k μ_k K[j, k]."""
    with np.errstate(divide="ignore"):
        return float(-np.mean(np.log(K @ mu)))


@dataclass
class MixtureFit:
    centers: np.ndarray
    weights: np.ndarray
    objective: float
    history: list = field(default_factory=list)
    iterations: int = 0

    def density(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=float).reshape(-1, self.centers.shape[1])
        return gaussian_kernel(Z[:, None, :] - self.centers[None, :, :]) @ self.weights

    def neg_log_density(self) -> ScalarField:
        def f(X):
            with np.errstate(divide="ignore"):
                return -np.log(self.density(X))
        return ScalarField(self.centers.shape[1], f, None, f"-log mixture({len(self.centers)})")


def _vertex_step(mu: np.ndarray, K: np.ndarray, obj: float) -> tuple[np.ndarray, float]:
    """Line search toward the simplex vertex with the steepest descent; lets zero weights revive."""
    p = K @ mu
    g = -(K / p[:, None]).mean(axis=0)
    k = int(np.argmin(g))
    d = -mu.copy()
    d[k] += 1.0
    if g @ d >= 0:
        return mu, obj
    res = minimize_scalar(lambda t: mixture_objective(mu + t * d, K), bounds=(0.0, 1.0), method="bounded",
                          options={"xatol": 1e-10})
    if res.fun < obj:
        cand = mu + res.x * d
        cand = np.maximum(cand, 0.0)
        cand /= cand.sum()
        val = mixture_objective(cand, K)
        if val < obj:
            return cand, val
    return mu, obj


def fit_mixture(sample, centers, max_iter: int = 2000, tol: float = 1e-12, init=None) -> MixtureFit:
    """Minimize the negative mean log-likelihood over the simplex.

    Each iteration takes a line-searched step toward the best vertex and then
    a multiplicative (EM) update μ_k <- μ_k (1/n) Σ_j K_jk / p_j. Neither
    step increases the objective. ``init`` may be a shorter weight vector for
    a prefix of the centers (zero-padded), which makes fits over nested center
    sets monotone in the count.
    """
    xi = np.asarray(sample, dtype=float)
    if xi.ndim == 1:
        xi = xi[:, None]
    C = np.asarray(centers, dtype=float)
    if C.ndim == 1:
        C = C[:, None]
    if len(xi) == 0:
        raise ValidationError("sample is empty")
    if not np.all(np.isfinite(xi)):
        raise ValidationError("sample contains non-finite values")
    if xi.shape[1] != C.shape[1]:
        raise ValidationError(f"sample is {xi.shape[1]}-D but centers are {C.shape[1]}-D")
    K = gaussian_kernel(xi[:, None, :] - C[None, :, :])
    if init is None:
        mu = np.full(len(C), 1.0 / len(C))
    else:
        init = np.asarray(init, dtype=float)
        if len(init) > len(C) or np.any(init < 0) or not init.sum() > 0:
            raise ValidationError("initial weights must be nonnegative and fit the centers")
        mu = np.zeros(len(C))
        mu[:len(init)] = init / init.sum()
    obj = mixture_objective(mu, K)
    if not math.isfinite(obj):
        raise NumericalFailure("mixture density vanishes at some sample point; widen the center box", 0, mu)
    hist = [obj]
    it = 0
    for it in range(1, max_iter + 1):
        mu, obj = _vertex_step(mu, K, obj)
        p = K @ mu
        em = mu * (K / p[:, None]).mean(axis=0)
        em /= em.sum()
        val = mixture_objective(em, K)
        if val <= obj:
            mu, obj = em, val
        hist.append(obj)
        if hist[-2] - obj <= tol:
            break
    return MixtureFit(C, mu, hist[-1], hist, it)


def fit_nested(sample, counts: Sequence[int], box, max_iter: int = 2000) -> dict[int, MixtureFit]:
    """Fits for increasing counts, each warm-started from the previous (nested) solution."""
    fits: dict[int, MixtureFit] = {}
    prev = None
    for n in sorted(set(int(c) for c in counts)):
        fits[n] = fit_mixture(sample, nested_centers(n, box), max_iter=max_iter,
                              init=None if prev is None else prev.weights)
        prev = fits[n]
    return fits


@dataclass
class KWRow:
    nu: int
    objective: float
    iterations: int
    value_gap: float            # objective(ν) - objective(2ν)
    dl_next: float              # epi distance between fitted -log densities for ν and 2ν


def kw_schedule(sample, counts: Sequence[int], box, grid: GridSpec | None = None, rho: float = 4.0,
                max_iter: int = 2000) -> list[KWRow]:
    """Fits for every count ν and its double, with the Cauchy-type epi distance between them.

    The comparison runs on the fitted negative log densities (1-D or 2-D),
    restricted to ``grid``.
    """
    counts = [int(c) for c in counts]
    if not counts or any(c < 1 for c in counts):
        raise ValidationError("center counts must be positive")
    fits = fit_nested(sample, counts + [2 * c for c in counts], box, max_iter)

    rows = []
    for nu in counts:
        a, b = fits[nu], fits[2 * nu]
        dl = float("nan")
        if grid is not None:
            dl = epi_distance(a.neg_log_density(), b.neg_log_density(), grid, rho)
        rows.append(KWRow(nu, a.objective, a.iterations, a.objective - b.objective, dl))
    return rows
