import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from setconv.demos import local_polyhedron_sample
from setconv.errors import ValidationError
from setconv.geometry import PointCloud, lattice
from setconv.vargeo import (Cone, ConvexPolyhedron, PiecewiseSmooth1D, cone_probe_agreement, direction_probes,
                            fermat_residual_1d, limiting_normal_cone_sampled, normal_cone_polyhedral,
                            optimality_residual, regular_normal_cone, subdifferential_1d, tangent_cone_polyhedral,
                            tangent_cone_sampled)

PROBES = direction_probes(2, 1.0)
ORTHANT = ConvexPolyhedron([[-1.0, 0.0], [0.0, -1.0]], [0.0, 0.0])


def same_cone(A: Cone, B: Cone, samples=200, seed=0):
    rng = np.random.default_rng(seed)
    W = rng.normal(size=(samples, A.dim))
    return all(A.contains(w, 1e-7) == B.contains(w, 1e-7) for w in W)


# --- exact cones -----------------------------------------------------------


def test_orthant_tangent_cone_is_itself():
    T = tangent_cone_polyhedral(ORTHANT, [0.0, 0.0])
    assert same_cone(T, Cone.generated([[1.0, 0.0], [0.0, 1.0]]))


def test_halfplane_boundary():
    H = ConvexPolyhedron([[0.0, 1.0]], [0.0])
    T = tangent_cone_polyhedral(H, [0.3, 0.0])
    assert same_cone(T, Cone.halfspaces([[0.0, 1.0]]))


def test_box_corner():
    B = ConvexPolyhedron.box([0.0, 0.0], [1.0, 1.0])
    T = tangent_cone_polyhedral(B, [1.0, 1.0])
    assert same_cone(T, Cone.generated([[-1.0, 0.0], [0.0, -1.0]]))
    Ts = tangent_cone_sampled(local_polyhedron_sample(B, [1.0, 1.0], 0.5, 0.005), [1.0, 1.0], [2, 3, 4], PROBES)
    assert cone_probe_agreement(T, Ts, PROBES) <= 1.0


def test_tangent_cone_outside_point():
    with pytest.raises(ValidationError, match="point not in set"):
        tangent_cone_polyhedral(ORTHANT, [-1.0, 0.0])


def test_polyhedron_json_and_validation():
    P = ConvexPolyhedron.from_json({"A": [[1, 0], [0, 1]], "b": [1, 2]})
    assert P.contains([1.0, 2.0]) and not P.contains([1.1, 0.0])
    with pytest.raises(ValidationError):
        ConvexPolyhedron([[0.0, 0.0]], [1.0])
    with pytest.raises(ValidationError):
        ConvexPolyhedron([[1.0, 0.0]], [1.0, 2.0])


def test_polar_examples():
    N = regular_normal_cone(Cone.generated([[1.0, 0.0], [0.0, 1.0]]))
    assert same_cone(N, Cone.generated([[-1.0, 0.0], [0.0, -1.0]]))
    a = np.array([1.0, 2.0])
    ray = regular_normal_cone(Cone.halfspaces([a]))
    assert np.allclose(ray.generators(), [a / np.linalg.norm(a)])
    assert regular_normal_cone(Cone.whole(2)).is_zero()


def test_cone_json_lists_generators():
    assert Cone.generated([[2.0, 0.0]]).to_json() == {"dim": 2, "generators": [[1.0, 0.0]]}


def random_polyhedral_cone(seed, dim):
    rng = np.random.default_rng(seed)
    return Cone.halfspaces(rng.normal(size=(rng.integers(1, 4), dim)))


@settings(max_examples=40)
@given(st.integers(0, 100_000), st.sampled_from([2, 3]))
def test_polarity_at_sampled_scale(seed, dim):
    T = random_polyhedral_cone(seed, dim)
    N = regular_normal_cone(T)
    G = T.generators()
    rng = np.random.default_rng(seed + 1)
    W = rng.uniform(0, 1, size=(50, len(G))) @ G if len(G) else np.zeros((1, dim))
    for v in N.generators():
        assert np.all(W @ v <= 1e-8)


@settings(max_examples=40)
@given(st.integers(0, 100_000), st.sampled_from([2, 3]))
def test_projection_moreau_split(seed, dim):
    T = random_polyhedral_cone(seed, dim)
    w = np.random.default_rng(seed).normal(size=dim)
    p = T.project(w)
    q = T.polar().project(w)
    assert np.allclose(p + q, w, atol=1e-8)
    assert abs(p @ q) <= 1e-8


# --- sampled cones ---------------------------------------------------------


POLYHEDRA = [
    (ORTHANT, [0.0, 0.0]),
    (ConvexPolyhedron([[0.0, 1.0]], [0.0]), [0.0, 0.0]),
    (ConvexPolyhedron.box([0.0, 0.0], [1.0, 1.0]), [1.0, 1.0]),
    (ConvexPolyhedron([[1.0, 1.0], [-1.0, 2.0]], [0.0, 0.0]), [0.0, 0.0]),
    (ConvexPolyhedron([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]], [1.0, 1.0, 1.0]), [1.0, 0.0]),
]


@pytest.mark.parametrize("P, x", POLYHEDRA)
def test_polyhedral_cones_match_sampled(P, x):
    C = local_polyhedron_sample(P, x, 0.5, 0.005)
    T, N = tangent_cone_polyhedral(P, x), normal_cone_polyhedral(P, x)
    assert cone_probe_agreement(T, tangent_cone_sampled(C, x, [2, 3, 4], PROBES), PROBES) <= 1.0
    assert cone_probe_agreement(N, limiting_normal_cone_sampled(C, x, probes=PROBES), PROBES) <= 1.0


def test_sampled_tangent_needs_nearby_samples():
    C = PointCloud(2, np.array([[1.0, 1.0], [1.1, 1.0]]))
    with pytest.raises(ValidationError):
        tangent_cone_sampled(C, [0.0, 0.0], [10], PROBES)


def v_below_abs():
    g = lattice(-0.5, 0.5, 0.005)
    P = np.stack(np.meshgrid(g, g, indexing="ij"), -1).reshape(-1, 2)
    return PointCloud(2, P[P[:, 1] <= np.abs(P[:, 0]) + 1e-12])


def test_nonconvex_tangent_cone_is_the_set():
    T = tangent_cone_sampled(v_below_abs(), [0.0, 0.0], [2, 3, 4], PROBES)
    U = T.points
    assert np.all(U[:, 1] <= np.abs(U[:, 0]) + 0.02)
    # every probe strictly inside keeps a representative within one probe step
    inside = PROBES.points[PROBES.points[:, 1] <= np.abs(PROBES.points[:, 0]) - 0.02]
    assert all(np.min(np.linalg.norm(U - u, axis=1)) <= 0.02 for u in inside)


def test_nonconvex_limiting_normals_are_two_rays():
    N = limiting_normal_cone_sampled(v_below_abs(), [0.0, 0.0], probes=PROBES)
    r = 1 / math.sqrt(2)
    assert sorted(map(tuple, N.points.round(3).tolist())) == [(-0.707, 0.707), (0.707, 0.707)]
    assert np.allclose(np.abs(N.points), r, atol=1e-3)


def test_disk_boundary_tangent_is_halfplane():
    g = lattice(-0.004, 0.004, 0.00005)
    P = np.stack(np.meshgrid(1 + g, g, indexing="ij"), -1).reshape(-1, 2)
    D = PointCloud(2, P[np.hypot(P[:, 0], P[:, 1]) <= 1 + 1e-12])
    T = tangent_cone_sampled(D, [1.0, 0.0], [1000], PROBES)
    assert cone_probe_agreement(Cone.halfspaces([[1.0, 0.0]]), T, PROBES) <= 1.0


def test_interior_point_has_no_normals():
    H = ConvexPolyhedron([[0.0, 1.0]], [0.0])
    S = local_polyhedron_sample(H, [0.0, -0.3], 0.2, 0.005)
    assert limiting_normal_cone_sampled(S, [0.0, -0.3], probes=PROBES).is_empty


def test_limiting_normals_need_samples():
    with pytest.raises(ValidationError, match="insufficient"):
        limiting_normal_cone_sampled(PointCloud(2, np.array([[5.0, 5.0]])), [0.0, 0.0])


# --- subgradients ----------------------------------------------------------


square = PiecewiseSmooth1D.smooth(lambda x: np.asarray(x) ** 2, lambda x: 2 * np.asarray(x), "x^2")
absval = PiecewiseSmooth1D.two_slopes(0.0, -1.0, 1.0)


def test_smooth_subgradient():
    assert subdifferential_1d(square, 1.0).points == (2.0,)


def test_convex_kink_interval():
    assert subdifferential_1d(PiecewiseSmooth1D.two_slopes(0.3, 0.5, 2.0, 1.0), 0.3).intervals == ((0.5, 2.0),)


def test_concave_kink_two_slopes():
    s = subdifferential_1d(PiecewiseSmooth1D.two_slopes(-1.0, -0.5, -4.0), -1.0)
    assert sorted(s.points) == [-4.0, -0.5] and not s.intervals
    assert not s.contains(-2.0)


def test_upward_jump_gives_half_line():
    # f = 0 on x <= 0, 1 + x on x > 0: lsc at 0, right side detached
    f = PiecewiseSmooth1D((0.0,), ((lambda x: 0 * np.asarray(x), lambda x: 0 * np.asarray(x)),
                                   (lambda x: 1 + np.asarray(x), lambda x: np.ones_like(np.asarray(x)))))
    s = subdifferential_1d(f, 0.0)
    assert s.intervals == ((0.0, math.inf),)
    assert (0.0, -1.0) in s.normal_directions()


def test_subgradient_of_infinite_value():
    f = PiecewiseSmooth1D.smooth(lambda x: np.full(np.shape(x), np.inf), lambda x: np.zeros(np.shape(x)))
    with pytest.raises(ValidationError):
        subdifferential_1d(f, 0.0)


def test_breakpoints_validated():
    line = (lambda x: x, lambda x: x)
    with pytest.raises(ValidationError):
        PiecewiseSmooth1D((1.0, 0.0), (line, line, line))
    with pytest.raises(ValidationError):
        PiecewiseSmooth1D((0.0,), (line,))


def test_fermat_examples():
    assert fermat_residual_1d(square, 0.0) == 0.0
    assert fermat_residual_1d(absval, 0.0) == 0.0
    assert fermat_residual_1d(square, 1.0) == 2.0


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-2, 2))
def test_kink_subgradients(s1, s2, at):
    f = PiecewiseSmooth1D.two_slopes(at, s1, s2)
    s = subdifferential_1d(f, at)
    if s1 <= s2:
        # convex kink: every element satisfies the subgradient inequality
        t = np.linspace(-2, 2, 41)
        for v in np.linspace(s1, s2, 5):
            assert s.contains(v)
            assert np.all(f.values(at + t) >= f.value(at) + v * t - 1e-9)
    else:
        assert set(s.points) == {s1, s2}


def test_fermat_consistency_along_sequence():
    xs = [1 / nu for nu in (10, 100, 1000, 10_000)]
    res = [fermat_residual_1d(square, x) for x in xs]
    assert all(b < a for a, b in zip(res, res[1:]))
    assert fermat_residual_1d(square, 0.0) <= 1e-12


# --- optimality residuals --------------------------------------------------


def test_optimality_examples():
    assert optimality_residual(lambda x: x, ORTHANT, [0.0, 0.0]) == 0.0
    H = ConvexPolyhedron([[1.0, 0.0]], [1.0])
    grad = lambda x: np.array([2 * (x[0] - 2), 0.0])
    assert optimality_residual(grad, H, [1.0, 0.0]) <= 1e-8
    assert optimality_residual(grad, H, [0.0, 0.0]) == pytest.approx(4.0)
    with pytest.raises(ValidationError):
        optimality_residual(grad, H, [2.0, 0.0])


def test_kkt_point_of_box_qp():
    # min |x - (2, 2)|^2 / 2 on the unit box: x* = (1, 1), -grad = (1, 1) in the corner normal cone
    B = ConvexPolyhedron.box([0.0, 0.0], [1.0, 1.0])
    grad = lambda x: np.asarray(x) - np.array([2.0, 2.0])
    assert optimality_residual(grad, B, [1.0, 1.0]) <= 1e-8
    assert optimality_residual(grad, B, [1.0, 0.5]) == pytest.approx(1.5)


@settings(max_examples=30)
@given(st.integers(0, 100_000))
def test_normals_are_robust_along_sequences(seed):
    rng = np.random.default_rng(seed)
    # cone vertex at 0 with two random rows; approach along the first face
    A = rng.normal(size=(2, 2))
    P = ConvexPolyhedron(A, [0.0, 0.0])
    d = np.array([-A[0, 1], A[0, 0]])
    if not P.contains(1e-3 * d):
        d = -d
    if not P.contains(1e-3 * d) or np.linalg.matrix_rank(A) < 2:
        return
    lam = rng.uniform(0.1, 2.0)
    g = -lam * A[0]                       # -g lies in N_P(x) on the open face
    for nu in (10, 100, 1000):
        assert optimality_residual(g, P, d / nu) <= 1e-8
    assert optimality_residual(g, P, [0.0, 0.0]) <= 1e-8
