import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from setconv.epi import (characterization_check, composite_epi_bound, epi_consequences_report, epi_distance,
                         epi_distance_cloud, epi_distance_kenmochi, hypo_distance, minima_bounds_report,
                         sample_epigraph, sampled_argmin, tightness_report)
from setconv.errors import DimensionMismatch, ValidationError
from setconv.fields import (FunctionSequence, GridSpec, ScalarField, affine, constant, cubic_problem, floor_ramp,
                            penalty, penalty_limit, point_mass_cdf, quadratic, scaled_abs, step_cdf_member, sum_of)
from setconv.geometry import NormSpec

from cases import GRID, H, RHO, piecewise_quadratic
from oracles import dl_loop, epi_cloud_points, golden_section

G1 = GridSpec.uniform(-3, 3, 0.01)


# --- sampled epigraphs -----------------------------------------------------


def test_epigraph_of_zero_is_upper_half_window():
    E = sample_epigraph(constant(0.0), GridSpec.uniform(-1, 1, 0.5), 1.0)
    pts = E.cloud.points
    assert pts[:, 1].min() == 0.0 and pts[:, 1].max() == 1.0
    assert {tuple(p) for p in pts} >= {(0.0, 0.0), (-1.0, 0.0), (1.0, 1.0)}


def test_epigraph_of_plus_infinity_is_empty():
    assert sample_epigraph(constant(math.inf), G1, 1.0).is_empty


def test_epigraph_matches_loop_construction():
    g = GridSpec.uniform(-2, 2, 0.1)
    f = quadratic([[1.0]], [0.5], -0.7)
    E = sample_epigraph(f, g, 1.5)
    ref = epi_cloud_points(f.on_grid(g), g.axis(0), 1.5, E.h_alpha)
    assert sorted(map(tuple, E.cloud.points.round(12).tolist())) == sorted(tuple(np.round(p, 12)) for p in ref)


def test_constant_shift_cloud_matches_loop_oracle():
    h, rho = 0.1, 1.0
    g = GridSpec.uniform(-3, 3, h)
    f, k = constant(0.0), constant(1.0)
    got = epi_distance_cloud(f, k, g, rho)
    # targets are the full sampled epigraphs, not truncated
    big = 4.0
    ha = sample_epigraph(f, g, big).h_alpha
    A = np.array(epi_cloud_points(f.on_grid(g), g.axis(0), big, ha))
    B = np.array(epi_cloud_points(k.on_grid(g), g.axis(0), big, ha))
    ref = dl_loop(A, B, rho)
    assert abs(got - 1.0) <= h
    assert abs(got - ref) <= 2 * h


def test_distance_of_identical_functions_is_zero():
    f = penalty(3.0)
    assert epi_distance_kenmochi(f, f, G1, 2.0) == 0.0
    assert epi_distance_cloud(f, f, G1, 2.0) == 0.0


def test_no_epigraph_in_window():
    with pytest.raises(ValidationError, match="no epigraph"):
        epi_distance_kenmochi(constant(math.inf), constant(math.inf), G1, 1.0)
    with pytest.raises(ValidationError, match="no epigraph"):
        epi_distance_cloud(constant(math.inf), constant(math.inf), G1, 1.0)


def test_one_side_infinite_is_infinite_or_large():
    # an empty epigraph against a nonempty one: the truncated excess is unbounded
    assert epi_distance_kenmochi(constant(math.inf), constant(0.0), G1, 1.0) == math.inf


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        epi_distance_kenmochi(constant(0.0), constant(0.0, dim=2), G1, 1.0)


def test_unknown_method():
    with pytest.raises(ValidationError):
        epi_distance(constant(0.0), constant(0.0), G1, 1.0, method="magic")


def test_kenmochi_matches_cloud_on_a_few_pairs():
    rng = np.random.default_rng(7)
    for _ in range(6):
        f, g = piecewise_quadratic(rng), piecewise_quadratic(rng)
        try:
            k = epi_distance_kenmochi(f, g, GRID, RHO)
        except ValidationError:
            continue
        c = epi_distance_cloud(f, g, GRID, RHO)
        assert abs(k - c) <= 2 * H + H / 2


def test_kenmochi_with_max_norm_on_2d_grid():
    g = GridSpec.uniform(-1, 1, 0.05, dim=2)
    f = quadratic(np.eye(2))
    k = sum_of([f, constant(0.3, dim=2)])
    mx = NormSpec.max_norm()
    assert abs(epi_distance_kenmochi(f, k, g, 1.0, mx) - epi_distance_cloud(f, k, g, 1.0, mx)) <= 0.1 + 0.025


@settings(max_examples=20)
@given(st.integers(0, 10_000), st.floats(0.2, 1.5), st.floats(0.2, 1.5))
def test_dl_monotone_in_rho_up_to_level_spacing(seed, r1, r2):
    rng = np.random.default_rng(seed)
    f, g = piecewise_quadratic(rng), piecewise_quadratic(rng)
    lo, hi = sorted([r1, r2])
    g05 = GridSpec.uniform(-3, 3, 0.05)
    try:
        a = epi_distance_cloud(f, g, g05, lo)
    except ValidationError:
        return
    # the level grid is rebuilt for each rho, so allow one level step
    assert a <= epi_distance_cloud(f, g, g05, hi) + 0.05


# --- hypo-distance ---------------------------------------------------------


def test_step_cdf_hypo_distance_decreases():
    g = GridSpec.uniform(-2, 2, 0.001)
    limit = point_mass_cdf(0.0)      # the rescaled step, upper semicontinuous at 0
    vals = [hypo_distance(step_cdf_member(nu), limit, g, 2.0) for nu in (1, 10, 100, 1000)]
    assert all(b < a for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= 0.01


@pytest.mark.parametrize("nu", [10, 100, 1000])
def test_point_mass_approximation(nu):
    h = 0.0005
    g = GridSpec.uniform(-1, 1, h)
    nudged = point_mass_cdf(-1.0 / nu)
    assert hypo_distance(nudged, point_mass_cdf(0.0), g, 1.0) <= 1.0 / nu + h


# --- minima and near-minimizers --------------------------------------------


def test_penalty_gap():
    r = minima_bounds_report(penalty_limit(), penalty(100.0), G1, 3.0)
    assert r.inf_f == 1.0
    assert r.inf_g == pytest.approx(100 / 101, abs=1e-3)
    assert r.gap <= r.dl + 2 * 0.01
    assert r.hypotheses_hold and r.argmin_bound_holds


def test_cubic_gap():
    grid = GridSpec.uniform(-3, 3, 0.001)
    exact, naive = cubic_problem(), cubic_problem(0.01)
    r = minima_bounds_report(exact, naive, grid, 3.0)
    assert r.inf_f == pytest.approx(-1.0, abs=1e-3)
    # naive substitution removes the feasible point x = 1
    assert r.inf_g == pytest.approx(1.0, abs=0.01)
    assert r.gap <= r.dl + 2 * 0.001


def test_minima_report_flags_hypotheses():
    r = minima_bounds_report(constant(5.0), constant(0.0), G1, 3.0)
    assert not r.hypotheses["inf_f_in_range"] and r.hypotheses["inf_g_in_range"]
    assert "hyp_inf_f_in_range" in r.as_dict()


def test_negative_epsilon_rejected():
    with pytest.raises(ValidationError):
        minima_bounds_report(constant(0.0), constant(0.0), G1, 1.0, epsilon=-1)


def test_sampled_argmin():
    X = np.arange(5.0)[:, None]
    V = np.array([3.0, 1.0, 1.0, 2.0, np.inf])
    assert sampled_argmin(X, V).ravel().tolist() == [1.0, 2.0]
    assert sampled_argmin(X, V, 1.0).ravel().tolist() == [1.0, 2.0, 3.0]
    assert len(sampled_argmin(X, np.full(5, np.inf))) == 0


def test_penalty_minimizer_against_golden_section():
    for theta in (1.0, 10.0):
        x = golden_section(lambda t: (t + 1) ** 2 + theta * t * t, -2, 2)
        assert x == pytest.approx(-1 / (1 + theta), abs=1e-7)


# --- composite functions ---------------------------------------------------


def test_composite_shift():
    g = GridSpec.uniform(-2, 2, 0.01)
    zero = constant(0.0)
    c = 0.05
    b = composite_epi_bound(zero, zero, lambda X: X, lambda X: X + c, lambda Y: Y[:, 0] ** 2,
                            lambda t: 2 * t, lambda t: 1.0, 1.0, g, 1)
    assert b.dl_base == 0.0
    assert b.holds and b.dl <= b.bound + 0.005
    assert b.sup_diff == pytest.approx(c)


def test_composite_max_of_two():
    g = GridSpec.uniform(-2, 2, 0.01)
    f0 = quadratic([[1.0]])
    g0 = quadratic([[1.0]], [0.1])
    F = lambda X: np.hstack([X, -X])
    G = lambda X: np.hstack([X + 0.02, -X])
    b = composite_epi_bound(f0, g0, F, G, lambda Y: Y.max(axis=1), lambda t: 1.0, lambda t: 1.0, 1.5, g, 2)
    assert b.holds
    assert b.bound == pytest.approx((1 + math.sqrt(2)) * b.dl_base + b.sup_diff)


def test_composite_rejects_decreasing_modulus():
    zero = constant(0.0)
    with pytest.raises(ValidationError, match="kappa"):
        composite_epi_bound(zero, zero, lambda X: X, lambda X: X, lambda Y: Y[:, 0], lambda t: -t,
                            lambda t: 1.0, 1.0, G1, 1)


def test_sum_rule_with_smooth_term():
    # adding the same continuous function keeps the distance within the shift
    g = GridSpec.uniform(-2, 2, 0.01)
    f, k = scaled_abs(1.0), scaled_abs(1.1)
    base = epi_distance_kenmochi(f, k, g, 1.5)
    q = quadratic([[0.2]])
    both = epi_distance_kenmochi(sum_of([f, q]), sum_of([k, q]), g, 1.5)
    assert both <= base + 0.2 * 2.0 + 0.01


# --- tightness and consequences --------------------------------------------


def test_floor_ramp_not_tight():
    seq = FunctionSequence(1, floor_ramp, lambda nu: -1.0)
    boxes = [GridSpec.uniform(-r, r, 0.5) for r in (1, 2, 4, 8)]
    rep = tightness_report(seq, [0.1], boxes, [10, 50, 100, 200])
    assert not rep.tight


def test_penalty_tight():
    seq = FunctionSequence(1, lambda nu: penalty(float(nu)), lambda nu: nu / (1 + nu))
    boxes = [GridSpec.uniform(-r, r, 0.001) for r in (0.5, 1, 2)]
    rep = tightness_report(seq, [0.01, 0.1], boxes, [1, 10, 100, 1000])
    assert rep.tight and rep.witness[0.1] == 0


def test_tightness_validation():
    seq = FunctionSequence(1, floor_ramp)
    with pytest.raises(ValidationError):
        tightness_report(seq, [0.1], [], [1])
    with pytest.raises(ValidationError):
        tightness_report(seq, [0.1], [G1], [])


def test_consequences_for_penalty():
    g = GridSpec.uniform(-1.5, 1.5, 0.01)
    seq = FunctionSequence(1, lambda nu: penalty(float(nu) ** 2), lambda nu: nu ** 2 / (1 + nu ** 2))
    rep = epi_consequences_report(seq, penalty_limit(), g, 40)
    assert rep.part_a and rep.part_b and rep.inf_converges and rep.part_e
    assert rep.inf_f == 1.0
    assert rep.best_schedule[2] <= 2 * rep.tol


def test_consequences_detect_wrong_limit():
    g = GridSpec.uniform(-1.5, 1.5, 0.01)
    seq = FunctionSequence(1, lambda nu: penalty(float(nu) ** 2), lambda nu: nu ** 2 / (1 + nu ** 2))
    rep = epi_consequences_report(seq, quadratic([[1.0]], [-2.0], 1.0), g, 40)
    assert not rep.part_a and not rep.inf_converges


def test_characterization_for_scaled_abs():
    g = GridSpec.uniform(-2, 2, 0.01)
    seq = FunctionSequence(1, lambda nu: scaled_abs(1 + 1 / nu))
    chk = characterization_check(seq, scaled_abs(1.0), g, None, [10, 100, 1000], lambda nu: 0.05, 0.1)
    assert chk.condition_a and chk.condition_b


def test_characterization_detects_wrong_limit():
    g = GridSpec.uniform(-2, 2, 0.01)
    seq = FunctionSequence(1, lambda nu: affine([0.0], 1.0))
    chk = characterization_check(seq, constant(0.0), g, None, [100], lambda nu: 0.05, 0.1)
    assert chk.condition_a and not chk.condition_b
    assert chk.worst_b == pytest.approx(1.0)
