"""Extended-real function oracles, evaluation grids and the function registry.

A :class:`ScalarField` wraps a vectorized callable mapping a ``(k, dim)``
array to ``k`` values in [-inf, inf]. Built-ins and combinators can be
assembled from JSON through :func:`field_from_json`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatch, ValidationError
from .geometry import PointCloud

INDICATOR_TOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    """Tensor grid on a box; ``steps[j]`` intervals on coordinate j."""

    box: tuple
    steps: tuple

    def __post_init__(self):
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        steps = tuple(int(s) for s in self.steps)
        if not box or len(box) != len(steps):
            raise ValidationError("grid needs one (lo, hi) and one step count per coordinate")
        for j, ((lo, hi), s) in enumerate(zip(box, steps)):
            if not lo < hi:
                raise ValidationError(f"grid coordinate {j}: need lo < hi, got {lo} and {hi}")
            if s < 1:
                raise ValidationError(f"grid coordinate {j}: step count must be positive")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "steps", steps)

    @classmethod
    def uniform(cls, lo: float, hi: float, h: float, dim: int = 1) -> "GridSpec":
        """Grid on [lo, hi]^dim whose spacing is h (rounded so that it divides hi - lo)."""
        s = max(1, int(round((hi - lo) / h)))
        return cls(((lo, hi),) * dim, (s,) * dim)

    @classmethod
    def parse(cls, items: Sequence[str]) -> "GridSpec":
        """From CLI strings ``lo:hi:steps``, one per coordinate."""
        box, steps = [], []
        for item in items:
            parts = str(item).split(":")
            if len(parts) != 3:
                raise ValidationError(f"grid {item!r}: expected lo:hi:steps")
            try:
                lo, hi, s = float(parts[0]), float(parts[1]), int(parts[2])
            except ValueError:
                raise ValidationError(f"grid {item!r}: expected lo:hi:steps") from None
            box.append((lo, hi))
            steps.append(s)
        return cls(tuple(box), tuple(steps))

    def to_strings(self) -> list[str]:
        return [f"{lo!r}:{hi!r}:{s}" for (lo, hi), s in zip(self.box, self.steps)]

    @property
    def dim(self) -> int:
        return len(self.box)

    @property
    def shape(self) -> tuple:
        return tuple(s + 1 for s in self.steps)

    @property
    def spacings(self) -> np.ndarray:
        return np.array([(hi - lo) / s for (lo, hi), s in zip(self.box, self.steps)])

    @property
    def spacing(self) -> float:
        return float(self.spacings.max())

    def axis(self, j: int) -> np.ndarray:
        (lo, hi), s = self.box[j], self.steps[j]
        i = np.arange(s + 1)
        # symmetric boxes give exactly symmetric axes that contain 0
        return (lo * (s - i) + hi * i) / s

    def axes(self) -> list[np.ndarray]:
        return [self.axis(j) for j in range(self.dim)]

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def cloud(self) -> PointCloud:
        return PointCloud(self.dim, self.points())

    def refine(self, factor: int) -> "GridSpec":
        return GridSpec(self.box, tuple(s * factor for s in self.steps))


# --------------------------------------------------------------------------


def _as_rows(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim <= 1:
        x = x.reshape(-1, dim) if dim > 1 or x.ndim == 1 else x.reshape(1, 1)
    if x.shape[-1] != dim:
        raise DimensionMismatch(f"field expects points in R^{dim}, got shape {x.shape}")
    return x


@dataclass
class ScalarField:
    """f: R^dim -> [-inf, inf] evaluated row-wise."""

    dim: int
    func: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    label: str = ""

    def values(self, X) -> np.ndarray:
        X = _as_rows(X, self.dim)
        v = np.asarray(self.func(X), dtype=float).reshape(len(X))
        if np.isnan(v).any():
            raise ValidationError(f"field {self.label or '<anonymous>'} produced NaN")
        return v

    def __call__(self, x) -> float:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return float(self.values(x.reshape(1, self.dim))[0])

    def gradient(self, x) -> np.ndarray:
        if self.grad is None:
            raise ValidationError(f"field {self.label or '<anonymous>'} has no gradient")
        x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(1, self.dim)
        return np.asarray(self.grad(x), dtype=float).reshape(self.dim)

    def on_grid(self, grid: GridSpec) -> np.ndarray:
        if grid.dim != self.dim:
            raise DimensionMismatch(f"grid is {grid.dim}-D, field is {self.dim}-D")
        return self.values(grid.points()).reshape(grid.shape)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return sum_of([self, other])

    def __neg__(self) -> "ScalarField":
        return scaled(self, -1.0)


def _ext_sum(parts: list[np.ndarray]) -> np.ndarray:
    out = parts[0].copy()
    for p in parts[1:]:
        with np.errstate(invalid="ignore"):
            s = out + p
        # inf + (-inf) = inf
        s[np.isnan(s)] = np.inf
        out = s
    return out


def sum_of(fields: Sequence[ScalarField], label: str = "") -> ScalarField:
    fields = list(fields)
    if not fields:
        raise ValidationError("sum needs at least one term")
    dim = fields[0].dim
    if any(f.dim != dim for f in fields):
        raise DimensionMismatch("sum terms have different dimensions")
    grad = None
    if all(f.grad is not None for f in fields):
        def grad(X):
            return sum(np.asarray(f.grad(X), dtype=float) for f in fields)
    return ScalarField(dim, lambda X: _ext_sum([f.values(X) for f in fields]), grad,
                       label or "+".join(f.label for f in fields))


def min_of(fields: Sequence[ScalarField], label: str = "") -> ScalarField:
    fields = list(fields)
    if not fields:
        raise ValidationError("min needs at least one term")
    dim = fields[0].dim
    if any(f.dim != dim for f in fields):
        raise DimensionMismatch("min terms have different dimensions")
    return ScalarField(dim, lambda X: np.min([f.values(X) for f in fields], axis=0), None,
                       label or "min(" + ",".join(f.label for f in fields) + ")")


def scaled(f: ScalarField, c: float, label: str = "") -> ScalarField:
    grad = None if f.grad is None else (lambda X: c * np.asarray(f.grad(X), dtype=float))

    def g(X):
        v = f.values(X)
        if c == 0:
            # 0 * inf stays inf so the domain is preserved
            return np.where(np.isinf(v), v, 0.0)
        return c * v
    return ScalarField(f.dim, g, grad, label or f"{c}*{f.label}")


def shifted(f: ScalarField, c: float) -> ScalarField:
    return ScalarField(f.dim, lambda X: f.values(X) + c, f.grad, f"{f.label}+{c}")


def compose_outer(h: Callable[[np.ndarray], np.ndarray], f: ScalarField, label: str = "") -> ScalarField:
    """x -> h(f(x)) for a vectorized scalar h."""
    return ScalarField(f.dim, lambda X: h(f.values(X)), None, label or f"h({f.label})")


def affine(a, b: float = 0.0) -> ScalarField:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    return ScalarField(len(a), lambda X: X @ a + b, lambda X: np.broadcast_to(a, X.shape).copy(),
                       f"affine({a.tolist()},{b})")


def quadratic(Q, c=None, r: float = 0.0) -> ScalarField:
    """x -> x'Qx/2 + c'x + r."""
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    n = Q.shape[0]
    if Q.shape != (n, n):
        raise ValidationError("field 'Q': must be square")
    c = np.zeros(n) if c is None else np.atleast_1d(np.asarray(c, dtype=float))
    if c.shape != (n,):
        raise ValidationError("field 'c': length must match Q")
    Qs = 0.5 * (Q + Q.T)
    return ScalarField(n, lambda X: 0.5 * np.einsum("ki,ij,kj->k", X, Qs, X) + X @ c + r,
                       lambda X: X @ Qs + c, "quadratic")


def constant(value: float, dim: int = 1) -> ScalarField:
    return ScalarField(dim, lambda X: np.full(len(X), float(value)), lambda X: np.zeros_like(X), f"const({value})")


def indicator(mask: Callable[[np.ndarray], np.ndarray], dim: int, label: str = "indicator") -> ScalarField:
    """0 where ``mask`` holds, +inf elsewhere."""
    return ScalarField(dim, lambda X: np.where(mask(X), 0.0, np.inf), None, label)


def indicator_point(c, tol: float = INDICATOR_TOL) -> ScalarField:
    c = np.atleast_1d(np.asarray(c, dtype=float))
    return indicator(lambda X: np.max(np.abs(X - c), axis=1) <= tol, len(c), f"iota{{{c.tolist()}}}")


@dataclass
class FunctionSequence:
    """ν -> ScalarField, with an optional exact infimum for each index."""

    dim: int
    generator: Callable[[int], ScalarField]
    infimum: Callable[[int], float] | None = None
    label: str = ""
    _cache: dict = field(default_factory=dict, repr=False)

    def __call__(self, nu: int) -> ScalarField:
        if nu not in self._cache:
            f = self.generator(nu)
            if f.dim != self.dim:
                raise DimensionMismatch(f"sequence member {nu} has dimension {f.dim}, expected {self.dim}")
            self._cache[nu] = f
        return self._cache[nu]


# --------------------------------------------------------------------------
# built-ins


def smooth_plus_values(alpha, theta: float):
    """(1/θ) ln(1 + exp(αθ)), evaluated without overflow."""
    if not theta > 0:
        raise ValidationError("theta must be positive")
    a = np.asarray(alpha, dtype=float)
    t = a * theta
    return np.maximum(a, 0.0) + np.log1p(np.exp(-np.abs(t))) / theta


def cubic_constraint(x):
    """x^3 - x^2 - x + 1 = (x - 1)^2 (x + 1)."""
    x = np.asarray(x, dtype=float)
    return (x - 1.0) ** 2 * (x + 1.0)


def penalty(theta: float) -> ScalarField:
    """(x + 1)^2 + θ x^2."""
    return ScalarField(1, lambda X: (X[:, 0] + 1) ** 2 + theta * X[:, 0] ** 2,
                       lambda X: 2 * (X + 1) + 2 * theta * X, f"penalty(theta={theta})")


def penalty_limit() -> ScalarField:
    """(x + 1)^2 restricted to {0}."""
    base = ScalarField(1, lambda X: (X[:, 0] + 1) ** 2, lambda X: 2 * (X + 1), "(x+1)^2")
    return sum_of([base, indicator_point([0.0])], "penalty-limit")


def cubic_problem(shift: float = 0.0) -> ScalarField:
    """-x + indicator{g(x) + shift <= 0}; shift = 1/ν gives the naive substitution."""
    def f(X):
        x = X[:, 0]
        return np.where(cubic_constraint(x) + shift <= 0, -x, np.inf)
    return ScalarField(1, f, None, f"cubic(shift={shift})")


def softened_cubic(theta: float, alpha: float) -> ScalarField:
    """(x, y) -> -x + θy on {y >= 0, g(x) + α <= y}."""
    def f(X):
        x, y = X[:, 0], X[:, 1]
        ok = (y >= 0) & (cubic_constraint(x) + alpha <= y)
        return np.where(ok, -x + theta * y, np.inf)
    return ScalarField(2, f, None, f"softened-cubic(theta={theta},alpha={alpha})")


def softened_cubic_limit() -> ScalarField:
    """(x, y) -> -x on {y = 0, g(x) <= 0}."""
    def f(X):
        x, y = X[:, 0], X[:, 1]
        ok = (np.abs(y) <= INDICATOR_TOL) & (cubic_constraint(x) <= 0)
        return np.where(ok, -x, np.inf)
    return ScalarField(2, f, None, "softened-cubic-limit")


def step_cdf_member(nu: float) -> ScalarField:
    """F^ν = f^ν/2 + 1/2 for the square-root ramp through the origin."""
    def f(X):
        x = X[:, 0]
        out = np.where(x <= -1 / nu, -1.0, 1.0)
        left = (x > -1 / nu) & (x <= 0)
        right = (x > 0) & (x <= 1 / nu)
        out = np.where(left, -np.sqrt(np.clip(-nu * x, 0, None)), out)
        out = np.where(right, np.sqrt(np.clip(nu * x, 0, None)), out)
        return 0.5 * out + 0.5
    return ScalarField(1, f, None, f"step-cdf(nu={nu})")


def point_mass_cdf(at: float = 0.0) -> ScalarField:
    return ScalarField(1, lambda X: np.where(X[:, 0] >= at, 1.0, 0.0), None, f"point-mass-cdf({at})")


def floor_ramp(nu: float) -> ScalarField:
    """max{-1, x/ν}."""
    return ScalarField(1, lambda X: np.maximum(-1.0, X[:, 0] / nu), None, f"floor-ramp(nu={nu})")


def scaled_abs(c: float = 1.0) -> ScalarField:
    return ScalarField(1, lambda X: c * np.abs(X[:, 0]), None, f"{c}|x|")


def softplus_field(theta: float, dim: int = 1) -> ScalarField:
    """Σ_i smooth_plus(x_i, θ)."""
    def grad(X):
        return 0.5 * (1 + np.tanh(0.5 * theta * X))
    return ScalarField(dim, lambda X: smooth_plus_values(X, theta).sum(axis=1), grad, f"softplus(theta={theta})")


def _p(obj: dict, key: str, default=None, kind=float):
    if key not in obj:
        if default is None:
            raise ValidationError(f"field '{key}': missing")
        return default
    v = obj[key]
    try:
        if isinstance(v, bool):
            raise TypeError
        return kind(v)
    except (TypeError, ValueError):
        raise ValidationError(f"field '{key}': expected {kind.__name__}, got {v!r}") from None


BUILTINS: dict[str, Callable[[dict], ScalarField]] = {
    "zero": lambda o: constant(0.0, _p(o, "dim", 1, int)),
    "const": lambda o: constant(_p(o, "value"), _p(o, "dim", 1, int)),
    "penalty": lambda o: penalty(_p(o, "theta")),
    "penalty-limit": lambda o: penalty_limit(),
    "cubic": lambda o: cubic_problem(0.0),
    "cubic-naive": lambda o: cubic_problem(1.0 / _p(o, "nu")),
    "softened-cubic": lambda o: softened_cubic(_p(o, "theta", math.sqrt(_p(o, "nu"))), _p(o, "alpha", 1.0 / _p(o, "nu"))),
    "softened-cubic-limit": lambda o: softened_cubic_limit(),
    "softplus": lambda o: softplus_field(_p(o, "theta"), _p(o, "dim", 1, int)),
    "step-cdf": lambda o: step_cdf_member(_p(o, "nu")),
    "point-mass-cdf": lambda o: point_mass_cdf(_p(o, "at", 0.0)),
    "floor-ramp": lambda o: floor_ramp(_p(o, "nu")),
    "abs": lambda o: scaled_abs(_p(o, "scale", 1.0)),
}


def field_from_json(obj) -> ScalarField:
    """Build a field from a JSON node.

    Nodes are ``{"name": <builtin>, ...params}``, ``{"affine": {"a": [...], "b": r}}``,
    ``{"quadratic": {"Q": [[...]], "c": [...], "r": r}}``, ``{"sum": [...]}``,
    ``{"min": [...]}`` or ``{"scale": c, "of": node}``.
    """
    if isinstance(obj, str):
        obj = {"name": obj}
    if not isinstance(obj, dict):
        raise ValidationError("function spec must be a JSON object")
    if "name" in obj:
        name = obj["name"]
        if name not in BUILTINS:
            raise ValidationError(f"field 'name': unknown function {name!r}; known: {', '.join(sorted(BUILTINS))}")
        return BUILTINS[name](obj)
    if "affine" in obj:
        node = obj["affine"]
        if not isinstance(node, dict) or "a" not in node:
            raise ValidationError("field 'affine': expected {a: [...], b: r}")
        return affine(_vec(node["a"], "affine.a"), _p(node, "b", 0.0))
    if "quadratic" in obj:
        node = obj["quadratic"]
        if not isinstance(node, dict) or "Q" not in node:
            raise ValidationError("field 'quadratic': expected {Q: [[...]], c: [...], r: r}")
        try:
            Q = np.array(node["Q"], dtype=float)
        except (TypeError, ValueError):
            raise ValidationError("field 'quadratic.Q': not a numeric matrix") from None
        c = _vec(node["c"], "quadratic.c") if "c" in node else None
        return quadratic(Q, c, _p(node, "r", 0.0))
    if "sum" in obj or "min" in obj:
        key = "sum" if "sum" in obj else "min"
        items = obj[key]
        if not isinstance(items, list) or not items:
            raise ValidationError(f"field '{key}': expected a non-empty list")
        parts = [field_from_json(x) for x in items]
        return sum_of(parts) if key == "sum" else min_of(parts)
    if "scale" in obj:
        if "of" not in obj:
            raise ValidationError("field 'of': missing")
        return scaled(field_from_json(obj["of"]), _p(obj, "scale"))
    raise ValidationError("function spec needs one of: name, affine, quadratic, sum, min, scale")


def _vec(v, name):
    try:
        a = np.atleast_1d(np.array(v, dtype=float))
    except (TypeError, ValueError):
        raise ValidationError(f"field '{name}': not a numeric vector") from None
    if a.ndim != 1:
        raise ValidationError(f"field '{name}': expected a flat list")
    return a
