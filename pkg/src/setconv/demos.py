"""Worked examples and command back-ends, each producing a deterministic Report."""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from . import geneq
from .epi import epi_distance, epi_distance_cloud, epi_distance_kenmochi, minima_bounds_report, sampled_argmin, \
    sample_epigraph
from .errors import ValidationError
from .fields import (GridSpec, cubic_constraint, cubic_problem, field_from_json, penalty, penalty_limit,
                     softened_cubic, softened_cubic_limit)
from .geometry import NormSpec, PointCloud, excess, interval_sample, lattice, truncated_hausdorff_detail
from .io import load_cloud, load_sample
from .kw import kw_schedule
from .limits import (SetSequence, default_tolerance, intersection_sequence, limit_estimate, set_convergence_report)
from .report import Report
from .solvers import NewtonParams, homotopy_solve, lcp_active_set, solve_cp_smoothed
from .vargeo import (ConvexPolyhedron, cone_probe_agreement, direction_probes, limiting_normal_cone_sampled,
                     normal_cone_polyhedral, tangent_cone_polyhedral, tangent_cone_sampled)

COMMON = {"rho": None, "norm": "euclidean", "grid": None, "seed": 0}

DEFAULTS: dict[str, dict] = {
    "dist": {"a": None, "b": None, "builtin": None, "rhos": [1.0, 2.0, 4.0], "center": None, "h": 0.01},
    "limits": {"sequence": "segments", "nu_max": 200, "tol": None, "mode": "estimates",
               "grid": ["-1:1:200"], "spacing": 0.001, "nu_schedule": [10, 50, 100, 200], "rhos": [1.0]},
    "epi-dist": {"f": "zero", "g": "zero", "grid": ["-3:3:600"], "rho": 3.0, "method": "kenmochi",
                 "rhos": None},
    "epi-bounds": {"f": "penalty-limit", "g": {"name": "penalty", "theta": 100}, "grid": ["-3:3:600"],
                   "rho": 3.0, "epsilon": 0.1},
    "penalty": {"thetas": [0, 1, 10, 100, 10000], "grid": ["-3:3:6000"], "rho": 4.0},
    "cubic": {"nus": [10, 100, 1000, 10000], "grid": ["-3:3:6000"], "rho": 2.0,
              "soft_grid_x": "-2:2:2000", "soft_steps_y": 120},
    "soften": {"nus": [10, 100, 1000, 10000], "theta_power": 0.5, "alpha_power": 1.0, "rho": 2.0,
               "soft_grid_x": "-2:2:2000", "soft_steps_y": 120},
    "kw-density": {"sample": None, "n": 200, "counts": [5, 10, 20, 40], "box": [[-4.0, 4.0]],
                   "grid": ["-3:3:600"], "rho": 4.0, "max_iter": 2000},
    "cp": {"instance": "lcp", "M": None, "q": None, "thetas": [10, 100, 1000, 10000], "z0": None,
           "grid": ["-2:2:40", "-2:2:40"], "rho": 2.0, "newton": {}},
    "homotopy": {"mapping": "sin-homotopy", "y_bar": 0.0, "lambdas": [1.0, 0.5, 0.1, 0.01, 0.0],
                 "grid": ["-4:4:800"], "rho": 3.0, "newton": {}},
    "cones": {"A": [[-1.0, 0.0], [0.0, -1.0]], "b": [0.0, 0.0], "x": [0.0, 0.0], "degrees": 1.0,
              "spacing": 0.005, "radius": 0.5, "nu_schedule": [2, 3, 4]},
}


def resolve(name: str, overrides: dict | None = None) -> dict:
    """Defaults of a demo merged with overrides; unknown keys are rejected."""
    if name not in DEFAULTS:
        raise ValidationError(f"unknown demo {name!r}; known: {', '.join(sorted(DEFAULTS))}")
    cfg = dict(COMMON)
    cfg.update(DEFAULTS[name])
    for k, v in (overrides or {}).items():
        if k not in cfg:
            raise ValidationError(f"field {k!r}: not a setting of {name}")
        if v is not None:
            cfg[k] = v
    return cfg


def _grid(cfg) -> GridSpec:
    if not cfg.get("grid"):
        raise ValidationError("field 'grid': a grid is required")
    g = cfg["grid"]
    return GridSpec.parse([g] if isinstance(g, str) else list(g))


def _norm(cfg) -> NormSpec:
    return NormSpec.from_json(cfg.get("norm") or "euclidean")


def _float(cfg, key) -> float:
    try:
        v = float(cfg[key])
    except (TypeError, ValueError):
        raise ValidationError(f"field {key!r}: expected a number") from None
    if math.isnan(v):
        raise ValidationError(f"field {key!r}: expected a number")
    return v


def _floats(cfg, key) -> list[float]:
    v = cfg[key]
    if not isinstance(v, (list, tuple)) or not v:
        raise ValidationError(f"field {key!r}: expected a nonempty list of numbers")
    try:
        return [float(x) for x in v]
    except (TypeError, ValueError):
        raise ValidationError(f"field {key!r}: expected a nonempty list of numbers") from None


def _newton(cfg) -> NewtonParams:
    try:
        return NewtonParams(**(cfg.get("newton") or {}))
    except TypeError as exc:
        raise ValidationError(f"field 'newton': {exc}") from None


# --------------------------------------------------------------------------


def demo_dist(cfg) -> Report:
    norm = _norm(cfg)
    center = cfg["center"]
    if cfg["builtin"] is not None:
        if cfg["builtin"] != "sharpness-pair":
            raise ValidationError(f"field 'builtin': unknown built-in {cfg['builtin']!r}")
        h = _float(cfg, "h")
        g = GridSpec.uniform(-3.0, 3.0, h)
        S, T = geneq.sharpness_S(), geneq.sharpness_T()
        A, B = S.graph(g, g), T.graph(g, g)
        norm = geneq.graph_norm(S)
    else:
        if not cfg["a"] or not cfg["b"]:
            raise ValidationError("field 'a'/'b': two point-cloud files are required")
        A, B = load_cloud(cfg["a"]), load_cloud(cfg["b"])
    rows = []
    for rho in _floats(cfg, "rhos"):
        d = truncated_hausdorff_detail(A, B, rho, norm, center)
        rows.append((rho, d.excess_cd, d.excess_dc, d.value, d.n_c, d.n_d, d.empty_window))
    res = {"excess_full_ab": excess(A, B, norm), "excess_full_ba": excess(B, A, norm),
           "points_a": len(A), "points_b": len(B)}
    return Report("dist", cfg, ["rho", "excess_ab", "excess_ba", "dl", "n_a", "n_b", "empty_window"], rows, res,
                  ("rho", ["dl"], False))


def _segments(spacing, start=1):
    def gen(nu):
        if nu < start:
            return PointCloud.empty(1)
        return PointCloud(1, interval_sample(1 / nu, 2 / nu, spacing)[:, None])
    return SetSequence(1, gen, spacing, "segments")


def _odd_even(spacing):
    def gen(nu):
        if nu % 2:
            return PointCloud(1, np.zeros((1, 1)))
        return PointCloud(1, lattice(0.0, 1.0, spacing)[:, None])
    return SetSequence(1, gen, spacing, "odd-even")


def _left_right(spacing):
    C = SetSequence(1, lambda nu: PointCloud(1, lattice(-1.0, -1.0 / nu, spacing)[:, None]), spacing, "left")
    D = SetSequence(1, lambda nu: PointCloud(1, lattice(1.0 / nu, 1.0, spacing)[:, None]), spacing, "right")
    return C, D


def _penalty_epi(rho):
    g = GridSpec.uniform(-rho, rho, 0.01)
    return SetSequence(2, lambda nu: sample_epigraph(penalty(float(nu)), g, rho).cloud, 0.01, "penalty-epi")


SEQUENCES: dict[str, Callable] = {
    "segments": lambda cfg: _segments(cfg["spacing"]),
    "segments-late": lambda cfg: _segments(cfg["spacing"], start=2),
    "odd-even": lambda cfg: _odd_even(cfg["spacing"]),
    "intersection": lambda cfg: intersection_sequence(*_left_right(cfg["spacing"])),
    "penalty-epi": lambda cfg: _penalty_epi(float(cfg["rho"] or 4.0)),
}


def _limit_set(name, cfg) -> PointCloud:
    s = cfg["spacing"]
    if name in ("segments", "segments-late"):
        return PointCloud(1, np.zeros((1, 1)))
    if name == "odd-even":
        return PointCloud(1, lattice(0.0, 1.0, s)[:, None])
    if name == "penalty-epi":
        rho = float(cfg["rho"] or 4.0)
        a = lattice(1.0, rho, 0.01)
        return PointCloud(2, np.stack([np.zeros(len(a)), a], axis=1))
    raise ValidationError(f"field 'sequence': {name!r} has no reference limit for mode 'report'")


def demo_limits(cfg) -> Report:
    name = cfg["sequence"]
    if name not in SEQUENCES:
        raise ValidationError(f"field 'sequence': unknown sequence {name!r}; known: {', '.join(sorted(SEQUENCES))}")
    seq = SEQUENCES[name](cfg)
    probes = _grid(cfg).cloud()
    if probes.dim != seq.dim:
        raise ValidationError(f"field 'grid': the sequence lives in R^{seq.dim}")
    norm = _norm(cfg)
    tol = cfg["tol"] if cfg["tol"] is not None else default_tolerance(probes, seq.spacing)
    nu_max = int(cfg["nu_max"])
    if cfg["mode"] == "report":
        rep = set_convergence_report(seq, _limit_set(name, cfg), probes, cfg["nu_schedule"], tol,
                                     _floats(cfg, "rhos"), norm)
        res = {"verdict": rep.verdict, "final_deviation": rep.final_deviation, "tol": rep.tol}
        for r, vals in rep.dl_table.items():
            res[f"dl_rho_{r:g}"] = list(vals)
        return Report("limits", cfg, rep.header(), list(rep.rows()), res)
    if cfg["mode"] != "estimates":
        raise ValidationError("field 'mode': expected 'estimates' or 'report'")
    inner = limit_estimate(seq, nu_max, probes, tol, "inner", norm=norm)
    outer = limit_estimate(seq, nu_max, probes, tol, "outer", norm=norm)
    kin = {tuple(p) for p in inner.candidate.points.tolist()}
    kout = {tuple(p) for p in outer.candidate.points.tolist()}
    rows = [(*p, tuple(p) in kin, tuple(p) in kout) for p in probes.points.tolist()]
    res = {"tol": float(tol), "tail_start": inner.tail_start, "inner_count": len(kin), "outer_count": len(kout)}
    if name == "intersection":
        C, D = _left_right(cfg["spacing"])
        oc = limit_estimate(C, nu_max, probes, tol, "outer", norm=norm).candidate
        od = limit_estimate(D, nu_max, probes, tol, "outer", norm=norm).candidate
        res["outer_of_parts_intersection_count"] = len(oc.intersect(od))
    cols = [f"x{j}" for j in range(probes.dim)] + ["inner", "outer"]
    return Report("limits", cfg, cols, rows, res)


def _field(cfg, key):
    try:
        return field_from_json(cfg[key])
    except ValidationError as exc:
        raise ValidationError(f"field {key!r}: {exc}") from None


def demo_epi_dist(cfg) -> Report:
    f, g = _field(cfg, "f"), _field(cfg, "g")
    grid = _grid(cfg)
    norm = _norm(cfg)
    rhos = _floats(cfg, "rhos") if cfg["rhos"] else [_float(cfg, "rho")]
    method = cfg["method"]
    if method not in ("kenmochi", "cloud", "both"):
        raise ValidationError("field 'method': expected kenmochi, cloud or both")
    rows = []
    for rho in rhos:
        k = epi_distance_kenmochi(f, g, grid, rho, norm) if method != "cloud" else float("nan")
        c = epi_distance_cloud(f, g, grid, rho, norm) if method != "kenmochi" else float("nan")
        rows.append((rho, k, c))
    return Report("epi-dist", cfg, ["rho", "dl_kenmochi", "dl_cloud"], rows, {"h": grid.spacing},
                  ("rho", ["dl_kenmochi", "dl_cloud"], False))


def demo_epi_bounds(cfg) -> Report:
    f, g = _field(cfg, "f"), _field(cfg, "g")
    grid = _grid(cfg)
    rep = minima_bounds_report(f, g, grid, _float(cfg, "rho"), _float(cfg, "epsilon"), _norm(cfg))
    d = rep.as_dict()
    return Report("epi-bounds", cfg, list(d), [tuple(d.values())], {"hypotheses_hold": rep.hypotheses_hold})


def demo_penalty(cfg) -> Report:
    grid = _grid(cfg)
    rho = _float(cfg, "rho")
    lo, hi = grid.box[0]
    limit = penalty_limit()
    rows = []
    for th in _floats(cfg, "thetas"):
        if th < 0:
            raise ValidationError("field 'thetas': penalty parameters must be nonnegative")
        f = penalty(th)
        r = minimize_scalar(lambda x: f(x), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        dl = epi_distance_kenmochi(f, limit, grid, rho)
        rows.append((th, float(r.x), -1.0 / (1.0 + th), float(r.fun), th / (1.0 + th), dl))
    dls = [r[-1] for r in rows]
    res = {"dl_strictly_decreasing": all(b < a for a, b in zip(dls, dls[1:])), "h": grid.spacing}
    return Report("penalty", cfg, ["theta", "argmin", "argmin_closed_form", "inf", "inf_closed_form", "dl"], rows,
                  res, ("theta", ["dl", "argmin"], True))


def naive_cubic_minimizer(nu: float) -> float:
    """Largest x with g(x) + 1/ν <= 0, i.e. the minimizer of -x under the shifted constraint."""
    return float(brentq(lambda x: cubic_constraint(x) + 1.0 / nu, -3.0, -1.0, xtol=1e-15, rtol=1e-15))


def _soft_dl(theta, alpha, rho, cfg):
    lo, hi, steps = cfg["soft_grid_x"].split(":")
    Y = 1.2 * min(rho, (rho + 2.0) / theta)
    g = GridSpec(((float(lo), float(hi)), (0.0, Y)), (int(steps), int(cfg["soft_steps_y"])))
    f = softened_cubic(theta, alpha)
    X = g.points()
    V = f.values(X)
    i = int(np.argmin(V))
    return epi_distance(f, softened_cubic_limit(), g, rho, NormSpec.max_norm()), float(V[i]), float(X[i, 0])


def demo_cubic(cfg) -> Report:
    grid = _grid(cfg)
    rho = _float(cfg, "rho")
    X = grid.points()
    exact = cubic_problem(0.0)
    exact_argmin = sampled_argmin(X, exact.values(X))
    rows = []
    for nu in _floats(cfg, "nus"):
        naive = cubic_problem(1.0 / nu)
        V = naive.values(X)
        grid_argmin = float(X[int(np.argmin(V)), 0]) if np.isfinite(V).any() else float("nan")
        dl_naive = epi_distance_kenmochi(naive, exact, grid, rho)
        theta, alpha = math.sqrt(nu), 1.0 / nu
        dl_soft, _, _ = _soft_dl(theta, alpha, rho, cfg)
        rows.append((nu, naive_cubic_minimizer(nu), grid_argmin, dl_naive, theta, alpha, dl_soft))
    res = {"exact_minimizer": float(exact_argmin[0, 0]) if len(exact_argmin) else float("nan")}
    return Report("cubic", cfg, ["nu", "naive_minimizer", "naive_grid_argmin", "dl_naive", "theta", "alpha",
                                 "dl_soft"], rows, res, ("nu", ["dl_naive", "dl_soft"], True))


def demo_soften(cfg) -> Report:
    rho = _float(cfg, "rho")
    rows = []
    for nu in _floats(cfg, "nus"):
        theta, alpha = nu ** float(cfg["theta_power"]), nu ** -float(cfg["alpha_power"])
        dl, inf, arg = _soft_dl(theta, alpha, rho, cfg)
        rows.append((nu, theta, alpha, theta * alpha, dl, inf, arg))
    return Report("soften", cfg, ["nu", "theta", "alpha", "theta_alpha", "dl", "inf_sampled", "argmin_x"], rows, {},
                  ("nu", ["dl"], True))


def demo_kw(cfg) -> Report:
    if cfg["sample"] is not None:
        sample = load_sample(cfg["sample"]) if isinstance(cfg["sample"], str) else np.asarray(cfg["sample"], float)
    else:
        sample = np.random.default_rng(int(cfg["seed"])).standard_normal(int(cfg["n"]))
    box = [tuple(b) for b in cfg["box"]]
    dim = 1 if sample.ndim == 1 else sample.shape[1]
    grid = _grid(cfg) if dim <= 2 else None
    rows = kw_schedule(sample, [int(c) for c in cfg["counts"]], box, grid, _float(cfg, "rho"), int(cfg["max_iter"]))
    out = [(r.nu, r.objective, r.iterations, r.value_gap, r.dl_next) for r in rows]
    objs = [r.objective for r in rows]
    res = {"objective_nonincreasing": all(b <= a for a, b in zip(objs, objs[1:])), "sample_size": len(sample)}
    return Report("kw-density", cfg, ["nu", "objective", "iterations", "value_gap_2nu", "dl_2nu"], out, res,
                  ("nu", ["objective", "dl_2nu"], True))


def _cp_instance(cfg):
    if cfg["instance"] == "lcp":
        M = np.asarray(cfg["M"] if cfg["M"] is not None else geneq.CANONICAL_LCP[0], dtype=float)
        q = np.asarray(cfg["q"] if cfg["q"] is not None else geneq.CANONICAL_LCP[1], dtype=float)
    elif cfg["instance"] == "linear-1d":
        M, q = np.eye(1), np.array([-1.0])
    else:
        raise ValidationError("field 'instance': expected 'lcp' or 'linear-1d'")
    M = np.atleast_2d(M)
    q = np.atleast_1d(q)
    if M.shape != (len(q), len(q)):
        raise ValidationError("field 'M': must be square and match 'q'")
    return M, q


def demo_cp(cfg) -> Report:
    M, q = _cp_instance(cfg)
    n = len(q)
    oracle = lcp_active_set(M, q)
    thetas = _floats(cfg, "thetas")
    z0 = np.zeros(n) if cfg["z0"] is None else np.asarray(cfg["z0"], dtype=float)
    result = solve_cp_smoothed(lambda x: M @ x + q, lambda x: M, thetas, z0, _newton(cfg))
    grid = _grid(cfg)
    if grid.dim != n:
        raise ValidationError(f"field 'grid': the instance needs a {n}-D grid")
    exact_map = geneq.lcp_normal_map(M, q)
    rho = _float(cfg, "rho")
    rows = []
    for st in result.trace:
        dl = geneq.graph_distance(geneq.lcp_smoothed_map(M, q, st.parameter), exact_map, rho, grid)
        rows.append((st.stage, st.parameter, st.iterations, st.residual, dl))
    res = {"z": result.z, "x": result.x, "oracle_x": oracle, "exact_residual": result.exact_residual,
           "smoothing_constant": result.smoothing_constant, "error_vs_oracle": float(np.abs(result.x - oracle).max())}
    return Report("cp", cfg, ["stage", "theta", "iterations", "residual", "graph_dl"], rows, res,
                  ("theta", ["graph_dl"], True))


def demo_homotopy(cfg) -> Report:
    S = geneq.mapping_from_json(cfg["mapping"])
    if not S.single_valued or S.jacobian is None or S.in_dim != 1:
        raise ValidationError("field 'mapping': homotopy needs a single-valued 1-D mapping with a derivative")
    lams = _floats(cfg, "lambdas")
    y_bar = _float(cfg, "y_bar")
    res_h = homotopy_solve(lambda x: S.func(np.atleast_2d(x)).ravel(), lambda x: S.jacobian(np.asarray(x)),
                           [y_bar], lams, _newton(cfg))
    grid = _grid(cfg)
    rho = _float(cfg, "rho")
    X = grid.points()
    win = X[np.abs(X[:, 0]) <= rho]
    sup_s = float(np.abs(S.func(win)).max())
    rows = []
    for st, x in zip(res_h.trace, res_h.stage_solutions):
        lam = st.parameter
        dl = geneq.graph_distance(geneq.homotopy_family(S, lam), S, rho, grid)
        rows.append((st.stage, lam, st.iterations, st.residual, float(x[0]), dl, lam * (rho + sup_s)))
    res = {"x": float(res_h.x[0]), "residual": res_h.residual, "window_sup": sup_s}
    return Report("homotopy", cfg, ["stage", "lambda", "iterations", "residual", "x", "graph_dl", "bound"], rows, res,
                  ("lambda", ["graph_dl", "bound"], False))


def local_polyhedron_sample(P: ConvexPolyhedron, x, radius: float, spacing: float) -> PointCloud:
    """Lattice points (anchored at x) of the box x ± radius that lie in P."""
    x = np.asarray(x, dtype=float)
    axes = [x[i] + lattice(-radius, radius, spacing) for i in range(len(x))]
    pts = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    return PointCloud(len(x), pts[P.contains_rows(pts)])


def demo_cones(cfg) -> Report:
    P = ConvexPolyhedron.from_json({"A": cfg["A"], "b": cfg["b"]})
    x = np.asarray(cfg["x"], dtype=float)
    if x.shape != (P.dim,):
        raise ValidationError("field 'x': dimension differs from the polyhedron's")
    T = tangent_cone_polyhedral(P, x)
    N = normal_cone_polyhedral(P, x)
    probes = direction_probes(P.dim, float(cfg["degrees"]))
    C = local_polyhedron_sample(P, x, float(cfg["radius"]), float(cfg["spacing"]))
    Ts = tangent_cone_sampled(C, x, cfg["nu_schedule"], probes)
    Ns = limiting_normal_cone_sampled(C, x, probes=probes)
    rows = []
    for name, G in (("tangent", T.generators()), ("normal", N.generators())):
        rows += [(name, j, *g) for j, g in enumerate(G.tolist())]
    res = {"tangent_agreement_deg": cone_probe_agreement(T, Ts, probes),
           "normal_agreement_deg": cone_probe_agreement(N, Ns, probes),
           "tangent_kept": len(Ts), "normal_kept": len(Ns), "tangent_is_zero": T.is_zero()}
    return Report("cones", cfg, ["cone", "index"] + [f"g{j}" for j in range(P.dim)], rows, res)


DEMOS: dict[str, Callable[[dict], Report]] = {
    "dist": demo_dist, "limits": demo_limits, "epi-dist": demo_epi_dist, "epi-bounds": demo_epi_bounds,
    "penalty": demo_penalty, "cubic": demo_cubic, "soften": demo_soften, "kw-density": demo_kw,
    "cp": demo_cp, "homotopy": demo_homotopy, "cones": demo_cones,
}


def run_demo(name: str, overrides: dict | None = None) -> Report:
    cfg = resolve(name, overrides)
    return DEMOS[name](cfg)
