"""Smoothed complementarity Newton and homotopy continuation."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericalFailure, ValidationError
from .fields import smooth_plus_values

LN2 = math.log(2.0)


def smooth_plus(alpha, theta: float):
    """(1/θ) ln(1 + e^{αθ}), a smooth upper approximation of max{0, α}.

    0 <= smooth_plus(α, θ) - max{0, α} <= ln 2 / θ.
    """
    if not theta > 0:
        raise ValidationError("theta must be positive")
    out = smooth_plus_values(alpha, theta)
    return float(out) if np.ndim(out) == 0 else out


def sigmoid(t):
    t = np.asarray(t, dtype=float)
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def normal_map_residual(F: Callable[[np.ndarray], np.ndarray], z) -> np.ndarray:
    """F(p) + z - p with p the projection of z onto the nonnegative orthant."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    p = np.maximum(z, 0.0)
    return np.asarray(F(p), dtype=float).reshape(z.shape) + z - p


@dataclass(frozen=True)
class NewtonParams:
    tol: float = 1e-10
    max_iter: int = 50
    max_halvings: int = 20

    def __post_init__(self):
        if not self.tol > 0 or self.max_iter < 1 or self.max_halvings < 0:
            raise ValidationError("Newton parameters must be positive")


@dataclass
class StageRecord:
    stage: int
    parameter: float
    iterations: int
    residual: float


def damped_newton(R: Callable, J: Callable, x0: np.ndarray, params: NewtonParams, stage: int) -> tuple[np.ndarray, int, float]:
    """Newton's method on R(x) = 0 with step halving whenever ||R|| would grow."""
    x = np.array(x0, dtype=float)
    r = R(x)
    nr = float(np.linalg.norm(r))
    if not math.isfinite(nr):
        raise NumericalFailure(f"stage {stage}: residual is not finite at the start", stage, x)
    for it in range(params.max_iter + 1):
        if nr <= params.tol:
            return x, it, nr
        if it == params.max_iter:
            break
        try:
            dx = np.linalg.solve(np.atleast_2d(J(x)), -r)
        except np.linalg.LinAlgError:
            raise NumericalFailure(f"stage {stage}: singular Jacobian", stage, x) from None
        t = 1.0
        for _ in range(params.max_halvings + 1):
            xn = x + t * dx
            rn = R(xn)
            nrn = float(np.linalg.norm(rn))
            if math.isfinite(nrn) and nrn <= nr:
                break
            t *= 0.5
        else:
            raise NumericalFailure(f"stage {stage}: no decrease after {params.max_halvings} halvings", stage, x)
        x, r, nr = xn, rn, nrn
    raise NumericalFailure(f"stage {stage}: no convergence in {params.max_iter} iterations "
                           f"(residual {nr:.3e})", stage, x)


# --------------------------------------------------------------------------
# complementarity


@dataclass
class CPResult:
    z: np.ndarray
    trace: list
    exact_residual: float
    theta_final: float

    @property
    def x(self) -> np.ndarray:
        return np.maximum(self.z, 0.0)

    @property
    def smoothing_constant(self) -> float:
        """exact residual * θ_final, the measured constant in residual <= C/θ."""
        return self.exact_residual * self.theta_final


def solve_cp_smoothed(F: Callable, JF: Callable, thetas: Sequence[float], z0,
                      params: NewtonParams | None = None) -> CPResult:
    """Find x >= 0, F(x) >= 0, x·F(x) = 0 through the smoothed normal map.

    Stage k solves F(Φ(z)) + z - Φ(z) = 0 with Φ = smooth_plus(., θ_k)
    componentwise, warm-started at the previous stage's z.
    """
    params = params or NewtonParams()
    thetas = [float(t) for t in thetas]
    if not thetas:
        raise ValidationError("smoothing schedule is empty")
    if any(t <= 0 for t in thetas) or any(b <= a for a, b in zip(thetas, thetas[1:])):
        raise ValidationError("smoothing schedule must be positive and strictly increasing")
    z = np.atleast_1d(np.asarray(z0, dtype=float)).copy()
    trace = []
    for k, th in enumerate(thetas, start=1):
        def R(v, th=th):
            p = smooth_plus_values(v, th)
            return np.asarray(F(p), dtype=float).reshape(v.shape) + v - p

        def J(v, th=th):
            p = smooth_plus_values(v, th)
            d = sigmoid(th * v)
            return np.atleast_2d(JF(p)) * d[None, :] + np.diag(1.0 - d)

        z, its, res = damped_newton(R, J, z, params, k)
        trace.append(StageRecord(k, th, its, res))
    exact = float(np.linalg.norm(normal_map_residual(F, z)))
    return CPResult(z, trace, exact, thetas[-1])


def lcp_active_set(M, q) -> np.ndarray:
    """Solve the LCP (x >= 0, Mx + q >= 0, complementary) by enumerating supports."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    n = len(q)
    for k in range(n + 1):
        for S in itertools.combinations(range(n), k):
            S = list(S)
            x = np.zeros(n)
            if S:
                try:
                    x[S] = np.linalg.solve(M[np.ix_(S, S)], -q[S])
                except np.linalg.LinAlgError:
                    continue
            w = M @ x + q
            if np.all(x >= -1e-12) and np.all(w >= -1e-12):
                return np.maximum(x, 0.0)
    raise NumericalFailure("LCP has no solution")


# --------------------------------------------------------------------------
# homotopy


@dataclass
class HomotopyResult:
    x: np.ndarray
    trace: list
    residual: float
    stage_solutions: list = field(default_factory=list)


def homotopy_solve(S: Callable, dS: Callable, y_bar, lambdas: Sequence[float], params: NewtonParams | None = None,
                   y_schedule: Sequence | None = None) -> HomotopyResult:
    """Continuation on (1 - λ) S(x) + λ x = ȳ over a decreasing λ schedule.

    A stage with λ = 1 starts (and ends) at x = ȳ; later stages warm-start.
    """
    params = params or NewtonParams()
    lams = [float(l) for l in lambdas]
    if not lams:
        raise ValidationError("homotopy schedule is empty")
    if any(not 0 <= l <= 1 for l in lams) or any(b >= a for a, b in zip(lams, lams[1:])):
        raise ValidationError("lambda schedule must lie in [0, 1] and decrease strictly")
    y_bar = np.atleast_1d(np.asarray(y_bar, dtype=float))
    ys = [y_bar] * len(lams) if y_schedule is None else [np.atleast_1d(np.asarray(y, dtype=float)) for y in y_schedule]
    if len(ys) != len(lams):
        raise ValidationError("y_schedule must match the lambda schedule")
    n = len(y_bar)
    x = ys[0].copy()
    trace, sols = [], []
    for k, (lam, y) in enumerate(zip(lams, ys), start=1):
        if lam == 1.0:
            x = y.copy()

        def R(v, lam=lam, y=y):
            return (1 - lam) * np.atleast_1d(S(v)) + lam * v - y

        def J(v, lam=lam):
            return (1 - lam) * np.atleast_2d(dS(v)) + lam * np.eye(n)

        x, its, res = damped_newton(R, J, x, params, k)
        trace.append(StageRecord(k, lam, its, res))
        sols.append(x.copy())
    resid = float(np.linalg.norm(np.atleast_1d(S(x)) - y_bar))
    return HomotopyResult(x, trace, resid, sols)


def bisection_root(fn: Callable[[float], float], lo: float, hi: float, tol: float = 1e-13) -> float:
    flo = fn(lo)
    if flo * fn(hi) > 0:
        raise ValidationError("bisection needs a sign change")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)
