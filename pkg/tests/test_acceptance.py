"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line before asserting; conftest prints the
collected lines in the terminal summary.
"""

import math

import numpy as np
import pytest

from setconv.demos import DEMOS, _left_right, _odd_even, local_polyhedron_sample, naive_cubic_minimizer, run_demo
from setconv.epi import epi_distance_cloud, epi_distance_kenmochi, minima_bounds_report
from setconv.fields import GridSpec, penalty, scaled_abs
from setconv.geneq import (CANONICAL_LCP, abs_function, graph_distance, near_solution_check, sharpness_S, sharpness_T,
                           subgradient_graph_distance)
from setconv.geometry import PointCloud, lattice
from setconv.limits import default_tolerance, inner_limit_estimate, intersection_sequence, outer_limit_estimate
from setconv.solvers import smooth_plus
from setconv.vargeo import (ConvexPolyhedron, PiecewiseSmooth1D, cone_probe_agreement, direction_probes,
                            limiting_normal_cone_sampled, normal_cone_polyhedral, optimality_residual,
                            subdifferential_1d, tangent_cone_polyhedral, tangent_cone_sampled)

from cases import GRID, H, RHO, random_pairs
from oracles import bisect, golden_section, lcp_enumerate

VERDICTS: list[str] = []
LN2 = math.log(2.0)

# the dist demo has no default input; everything else runs on its defaults
SUITE_OVERRIDES = {"dist": {"builtin": "sharpness-pair"}}


def verdict(number: int, label: str, checks: dict[str, bool], detail: str = ""):
    failed = [k for k, ok in checks.items() if not ok]
    line = f"criterion {number:2d} {'PASS' if not failed else 'FAIL'}  {label}"
    if detail:
        line += f"  [{detail}]"
    if failed:
        line += "  failed: " + ", ".join(failed)
    VERDICTS.append(line)
    print(line)
    assert not failed, line


def run_suite():
    return {name: run_demo(name, SUITE_OVERRIDES.get(name)) for name in DEMOS}


@pytest.fixture(scope="module")
def suite():
    return run_suite()


@pytest.fixture(scope="module")
def pairs():
    return random_pairs(50)


def test_criterion_01_sharpness():
    in_grid = GridSpec.uniform(-3, 3, 0.01)
    out_grid = GridSpec.parse(["0:3:300"])
    d = graph_distance(sharpness_S(), sharpness_T(), 2.0, in_grid, out_grid)
    r = near_solution_check(sharpness_S(), sharpness_T(), [0.0], 0.0, 1.1, 2.0, in_grid, out_grid)
    verdict(1, "sharpness pair", {
        "dl within 0.02 of 1": abs(d - 1.0) <= 0.02,
        "excess within 0.02 of 1": abs(r.excess - 1.0) <= 0.02,
        "inequality satisfied": bool(r.holds),
    }, f"dl={d:.4f} excess={r.excess:.4f}")


def test_criterion_02_kenmochi_matches_cloud(pairs):
    worst = max(abs(epi_distance_kenmochi(f, g, GRID, RHO) - epi_distance_cloud(f, g, GRID, RHO)) for f, g in pairs)
    verdict(2, "Kenmochi vs epigraph cloud", {
        "at least 50 pairs": len(pairs) >= 50,
        "every pair within 2h + h/2": worst <= 2 * H + H / 2,
    }, f"pairs={len(pairs)} max|diff|={worst:.4f}")


def test_criterion_03_minima_bounds(pairs):
    reports = [minima_bounds_report(f, g, GRID, RHO, slack=2 * H) for f, g in pairs]
    eligible = [r for r in reports if r.hypotheses_hold]
    verdict(3, "minima and argmin bounds", {
        "some pairs meet the hypotheses": len(eligible) > 0,
        "|inf f - inf g| <= dl + 2h": all(r.gap <= r.dl + 2 * H for r in eligible),
        "argmin excess bound": all(r.argmin_bound_holds for r in eligible),
        "default delta": all(r.delta == pytest.approx(r.epsilon + 2 * r.dl + 3 * H) for r in eligible),
    }, f"eligible={len(eligible)}/{len(reports)}")


def test_criterion_04_penalty(suite):
    rep = suite["penalty"]
    thetas = rep.column("theta")
    argmins = dict(zip(thetas, rep.column("argmin")))
    errs = []
    for th in (1.0, 10.0, 100.0, 1e4):
        f = penalty(th)
        oracle = golden_section(lambda x: float(f.values(np.array([[x]]))[0]), -3.0, 3.0)
        errs += [abs(oracle - (-1 / (1 + th))), abs(argmins[th] - oracle)]
    dls = rep.column("dl")
    inf_final = rep.column("inf")[thetas.index(1e4)]
    verdict(4, "penalty demo", {
        "argmin within 1e-6 of oracle": max(errs) <= 1e-6,
        "dl strictly decreasing": all(b < a for a, b in zip(dls, dls[1:])),
        "inf within 1e-2 of 1": abs(inf_final - 1.0) <= 1e-2,
    }, f"max argmin err={max(errs):.2e} dl={[round(d, 4) for d in dls]}")


def test_criterion_05_cubic(suite):
    rep = suite["cubic"]
    nus = rep.column("nu")
    soft = rep.column("dl_soft")
    naive = naive_cubic_minimizer(100)
    exact = rep.results["exact_minimizer"]
    verdict(5, "cubic instability and softening", {
        "naive minimizer within 0.05 of -1": abs(naive + 1.0) <= 0.05,
        "exact minimizer is 1": abs(exact - 1.0) <= H,
        "softened dl decreasing": all(b < a for a, b in zip(soft, soft[1:])),
        "softened dl <= 0.05 at nu = 1e4": soft[nus.index(1e4)] <= 0.05,
    }, f"naive={naive:.4f} exact={exact:.3f} dl_soft={[round(d, 3) for d in soft]}")


def test_criterion_06_smoothing_envelope():
    rng = np.random.default_rng(6)
    alpha = rng.uniform(-20, 20, size=10_000)
    ok = True
    for th in (1.0, 10.0, 100.0):
        gap = smooth_plus(alpha, th) - np.maximum(alpha, 0.0)
        ok &= bool(gap.min() >= 0.0 and gap.max() <= LN2 / th)
    v = float(smooth_plus(0.0, 10.0))
    verdict(6, "smoothing envelope", {
        "0 <= gap <= ln2/theta": ok,
        "smooth_plus(0, 10)": abs(v - 0.0693147) <= 1e-7,
    }, f"smooth_plus(0,10)={v:.7f}")


def test_criterion_07_complementarity(suite):
    M, q = CANONICAL_LCP
    oracle = lcp_enumerate(M, q)
    rep = suite["cp"]
    x = np.asarray(rep.results["x"])
    theta_final = rep.column("theta")[-1]
    res = rep.results["exact_residual"]
    verdict(7, "smoothed complementarity", {
        "oracle has the unique solution (1/3, 1/3)": len(oracle) == 1 and np.allclose(oracle[0], 1 / 3),
        "solution within 1e-4": float(np.abs(x - 1 / 3).max()) <= 1e-4,
        "residual <= 10 ln2 / theta": res <= 10 * LN2 / theta_final,
    }, f"x={x.tolist()} residual={res:.2e}")


def test_criterion_08_homotopy(suite):
    root = bisect(lambda x: x + math.sin(x) + 1, -2.0, 0.0)
    rep = suite["homotopy"]
    dls, bounds = rep.column("graph_dl"), rep.column("bound")
    x = rep.results["x"]
    verdict(8, "homotopy continuation", {
        "root within 1e-4 of bisection": abs(x - root) <= 1e-4,
        "root near -0.5110": abs(root + 0.5110) <= 1e-4,
        "graph distance within 1.05 bound": all(d <= 1.05 * b for d, b in zip(dls, bounds)),
        "graph distance tends to 0": all(b <= a for a, b in zip(dls, dls[1:])) and dls[-1] == 0.0,
    }, f"x={x:.6f} dl={[round(d, 4) for d in dls]}")


def test_criterion_09_set_limits():
    spacing = 0.001
    probes = PointCloud(1, lattice(-1, 1, 0.01)[:, None])
    tol = default_tolerance(probes, spacing)
    seq = _odd_even(spacing)
    inner = inner_limit_estimate(seq, 200, probes, tol)
    outer = outer_limit_estimate(seq, 200, probes, tol)
    covered = set(lattice(0, 1, 0.01).tolist()) <= set(outer.points[:, 0].tolist())
    C, D = _left_right(spacing)
    both = outer_limit_estimate(intersection_sequence(C, D), 200, probes, tol)
    parts = outer_limit_estimate(C, 200, probes, tol).intersect(outer_limit_estimate(D, 200, probes, tol))
    verdict(9, "set-limit examples", {
        "odd/even inner within tol of 0": bool(np.all(np.abs(inner.points[:, 0]) <= tol + 1e-12)),
        "odd/even outer covers [0,1]": covered,
        "outer of intersections empty": both.is_empty,
        "intersection of outers holds 0": [0.0] in parts.points.tolist(),
    }, f"tol={tol:.4f}")


POLYHEDRA = [
    (ConvexPolyhedron([[-1.0, 0.0], [0.0, -1.0]], [0.0, 0.0]), [0.0, 0.0]),
    (ConvexPolyhedron([[0.0, 1.0]], [0.0]), [0.0, 0.0]),
    (ConvexPolyhedron.box([0.0, 0.0], [1.0, 1.0]), [1.0, 1.0]),
    (ConvexPolyhedron([[1.0, 1.0], [-1.0, 2.0]], [0.0, 0.0]), [0.0, 0.0]),
    (ConvexPolyhedron([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]], [1.0, 1.0, 1.0]), [1.0, 0.0]),
]


def test_criterion_10_variational_geometry():
    square = PiecewiseSmooth1D.smooth(lambda x: np.asarray(x) ** 2, lambda x: 2 * np.asarray(x))
    convex = subdifferential_1d(PiecewiseSmooth1D.two_slopes(0.3, 0.5, 2.0, 1.0), 0.3)
    concave = subdifferential_1d(PiecewiseSmooth1D.two_slopes(-1.0, -0.5, -4.0), -1.0)
    probes = direction_probes(2, 1.0)
    worst = 0.0
    for P, x in POLYHEDRA:
        C = local_polyhedron_sample(P, x, 0.5, 0.005)
        worst = max(worst,
                    cone_probe_agreement(tangent_cone_polyhedral(P, x), tangent_cone_sampled(C, x, [2, 3, 4], probes),
                                         probes),
                    cone_probe_agreement(normal_cone_polyhedral(P, x), limiting_normal_cone_sampled(C, x, probes=probes),
                                         probes))
    box = ConvexPolyhedron.box([0.0, 0.0], [1.0, 1.0])
    half = ConvexPolyhedron([[1.0, 0.0]], [1.0])
    kkt = [
        optimality_residual(lambda z: np.asarray(z) - 2.0, box, [1.0, 1.0]),
        optimality_residual(lambda z: np.array([2 * (z[0] - 2), 0.0]), half, [1.0, 0.0]),
        optimality_residual(lambda z: np.asarray(z, dtype=float), POLYHEDRA[0][0], [0.0, 0.0]),
    ]
    verdict(10, "variational geometry", {
        "d(x^2)(1) = {2}": subdifferential_1d(square, 1.0).points == (2.0,),
        "convex kink [1/2, 2]": convex.intervals == ((0.5, 2.0),) and not convex.points,
        "concave kink {-4, -1/2}": sorted(concave.points) == [-4.0, -0.5] and not concave.intervals,
        "5 polyhedra within 1 degree": worst <= 1.0,
        "KKT residuals <= 1e-8": max(kkt) <= 1e-8,
    }, f"worst angle={worst:.3f} deg")


def test_criterion_11_subgradient_epi_consistency():
    h = 0.001
    grid = GridSpec.uniform(-2, 2, h)
    values = {}
    for nu in (10, 100, 1000):
        e = epi_distance_kenmochi(scaled_abs(1 + 1 / nu), scaled_abs(1.0), grid, 2.0)
        s = subgradient_graph_distance(abs_function(1 + 1 / nu), abs_function(), grid, 2.0, h)
        values[nu] = (e, s)
    verdict(11, "subgradient and epigraph convergence", {
        f"nu={nu}": e <= 3 / nu + 2 * h and s <= 3 / nu + 2 * h for nu, (e, s) in values.items()
    }, " ".join(f"nu={nu}:({e:.4f},{s:.4f})" for nu, (e, s) in values.items()))


def test_criterion_12_reproducible(suite):
    again = run_suite()
    same = {name: suite[name].to_csv() == again[name].to_csv() for name in DEMOS}
    verdict(12, "byte-identical demo reruns", {f"{n} identical": ok for n, ok in same.items()},
            f"demos={len(same)}")
