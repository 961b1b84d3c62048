import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from clairaut.errors import DegenerateFrameError, DegeneratePlaneError, SingularMetricError
from clairaut.fields import metric_from_expressions, scalar_field_from_expression, vector_field_from_expressions
from clairaut.geometry import (
    ChartManifold,
    MetricField,
    ScalarField,
    TangentVector,
    VectorField,
    christoffel,
    covariant_derivative,
    divergence,
    gradient,
    gram_schmidt,
    hessian,
    laplacian,
    lie_bracket,
    metric_inner,
    riemann_curvature,
    sectional,
    sectional_curvature,
)

X = ["x1", "x2"]


def euclid(m=2):
    names = [f"x{i + 1}" for i in range(m)]
    return ChartManifold(m, metric_from_expressions([[1 if i == j else 0 for j in range(m)] for i in range(m)], names), "E")


def example2(fd=False):
    entries = [["exp(2*x2)", 0], [0, "exp(2*x2)"]]
    metric = metric_from_expressions(entries, X)
    if fd:
        metric = MetricField(2, metric.eval)
    return ChartManifold(2, metric, "example2")


def sphere(fd=False):
    metric = metric_from_expressions([[1, 0], [0, "sin(x1)^2"]], X)
    if fd:
        metric = MetricField(2, metric.eval)
    return ChartManifold(2, metric, "S2")


def tv(p, c):
    return TangentVector(np.asarray(p, float), np.asarray(c, float))


# metric inner product


def test_euclidean_axes_orthogonal():
    assert metric_inner(euclid(), tv([0, 0], [1, 0]), tv([0, 0], [0, 1])) == 0.0


def test_example2_vertical_vector_norm():
    p = [0.4, 0.0]
    assert metric_inner(example2(), tv(p, [1, -1]), tv(p, [1, -1])) == pytest.approx(2.0, abs=1e-12)


def test_example2_metric_entry_matches_scalar_evaluation():
    p = [0.0, 1.0]
    got = metric_inner(example2(), tv(p, [1, 0]), tv(p, [1, 0]))
    assert got == pytest.approx(math.e ** 2, rel=1e-14)
    assert got == pytest.approx(oracles.example2_metric(np.array(p))[0, 0], rel=1e-14)


def test_inner_rejects_mismatched_base_points():
    with pytest.raises(ValueError):
        metric_inner(euclid(), tv([0, 0], [1, 0]), tv([1, 0], [1, 0]))


def test_singular_metric_raises():
    man = ChartManifold(2, metric_from_expressions([["x1", 0], [0, 1]], X))
    with pytest.raises(SingularMetricError):
        man.inverse_metric(np.array([-1.0, 0.0]))
    bad = ChartManifold(1, metric_from_expressions([["log(x1)"]], ["x1"]))
    with pytest.raises(SingularMetricError):
        bad.g(np.array([-1.0]))


# Christoffel symbols


def test_euclidean_christoffel_vanish():
    assert np.all(christoffel(euclid(3), [0.3, -1, 2]).values == 0.0)


def test_example2_christoffel_table_exact():
    expected = oracles.example2_christoffel()
    for p in ([0.0, 0.0], [0.7, -0.3], [-1.2, 1.1]):
        assert np.array_equal(example2().christoffel_values(np.array(p)), expected)


def test_example2_christoffel_finite_difference_path():
    expected = oracles.example2_christoffel()
    for p in ([0.0, 0.0], [0.7, -0.3]):
        np.testing.assert_allclose(example2(fd=True).christoffel_values(np.array(p)), expected, atol=1e-6)


def test_sphere_christoffel_matches_fd_oracle():
    p = np.array([math.pi / 3, 0.2])
    man = sphere()
    G = man.christoffel_values(p)
    oracle = oracles.christoffel_loops(oracles.sphere_metric, p)
    np.testing.assert_allclose(G, oracle, atol=1e-8)
    assert G[0, 1, 1] == pytest.approx(-math.sin(math.pi / 3) * math.cos(math.pi / 3), abs=1e-12)
    assert G[1, 0, 1] == pytest.approx(1 / math.tan(math.pi / 3), abs=1e-12)


def test_metric_partials_match_fd_oracle(rng):
    man = ChartManifold(3, metric_from_expressions(
        [["1 + x2^2", "x1*x3/4", 0], ["x1*x3/4", "exp(x1)", 0], [0, 0, "2 + sin(x2)"]], ["x1", "x2", "x3"]))
    for _ in range(5):
        p = rng.uniform(-1, 1, 3)
        np.testing.assert_allclose(man.metric.derivatives(p), oracles.fd_partials(man.g, p), atol=1e-8)
        np.testing.assert_allclose(man.christoffel_values(p), oracles.christoffel_loops(man.g, p), atol=1e-8)


# covariant derivative


def test_covariant_derivative_of_constant_field_in_flat_space():
    f = VectorField.constant([1.0, 2.0])
    assert np.all(covariant_derivative(euclid(), tv([1, 1], [0.3, 0.5]), f).components == 0)


def test_example2_frame_derivatives():
    man = example2()
    e1 = vector_field_from_expressions(["exp(-x2)", 0], X)
    e2 = vector_field_from_expressions([0, "exp(-x2)"], X)
    for p in ([0.0, 0.0], [0.4, -0.6], [-0.2, 0.9]):
        p = np.array(p)
        d11 = covariant_derivative(man, e1.at(p), e1).components
        np.testing.assert_allclose(d11, [0, -math.exp(-2 * p[1])], atol=1e-13)
        d21 = covariant_derivative(man, e2.at(p), e1).components
        np.testing.assert_allclose(d21, [0, 0], atol=1e-13)


def test_finite_difference_field_derivative_agrees_with_jacobian():
    man = example2()
    e1 = vector_field_from_expressions(["exp(-x2)", "x1*x2"], X)
    no_jac = VectorField(e1.eval, "e1")
    p = np.array([0.3, 0.2])
    u = np.array([0.4, -1.0])
    np.testing.assert_allclose(
        covariant_derivative(man, tv(p, u), no_jac).components,
        covariant_derivative(man, tv(p, u), e1).components,
        atol=1e-9,
    )


# curvature


def test_flat_curvature_vanishes():
    p = [0.2, 0.1, 0.3]
    z = riemann_curvature(euclid(3), p, tv(p, [1, 0, 0]), tv(p, [0, 1, 0]), tv(p, [0, 0, 1]))
    assert np.all(z.components == 0)
    assert sectional(euclid(), [0, 0], [1, 0], [0, 1]) == 0.0


def test_sphere_riemann_matches_constant_curvature_oracle():
    p = np.array([1.1, 0.4])
    man = sphere()
    R = man.riemann_values(p)
    np.testing.assert_allclose(R, oracles.constant_curvature_riemann(man.g(p), 1.0), atol=1e-7)
    e = [np.array([1.0, 0]), np.array([0, 1 / math.sin(p[0])])]
    z = riemann_curvature(man, p, tv(p, e[0]), tv(p, e[1]), tv(p, e[1])).components
    assert float(e[0] @ man.g(p) @ z) == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("fd", [False, True])
def test_sphere_sectional_curvature_is_one(fd, rng):
    man = sphere(fd)
    for _ in range(5):
        p = np.array([rng.uniform(0.5, 2.5), rng.uniform(-3, 3)])
        u, v = rng.normal(size=2), rng.normal(size=2)
        assert sectional_curvature(man, p, tv(p, u), tv(p, v)) == pytest.approx(1.0, abs=1e-6)


def test_hyperbolic_plane_and_brute_force_oracle():
    man = ChartManifold(2, metric_from_expressions([["1/x2^2", 0], [0, "1/x2^2"]], X))
    p = np.array([0.3, 1.4])
    assert sectional(man, p, [1, 0], [0, 1]) == pytest.approx(-1.0, abs=1e-6)
    assert sectional(man, p, [1, 0], [0, 1]) == pytest.approx(
        oracles.sectional_loops(oracles.hyperbolic_half_plane, p, np.array([1.0, 0]), np.array([0, 1.0])), abs=1e-5)


def test_warped_3d_riemann_matches_loops():
    man = ChartManifold(3, metric_from_expressions(
        [[1, 0, 0], [0, "(2 + sin(x1))^2", 0], [0, 0, "(2 + sin(x1))^2 * cos(x2)^2"]], ["x1", "x2", "x3"]))
    p = np.array([0.3, 0.2, -0.4])
    np.testing.assert_allclose(man.riemann_values(p), oracles.riemann_loops(man.g, p), atol=1e-5)


settings_small = settings(max_examples=40, deadline=None, derandomize=True)
vec2 = st.tuples(st.floats(-2, 2), st.floats(-2, 2)).map(np.array)


@settings_small
@given(x=vec2, y=vec2, z=vec2, th=st.floats(0.4, 2.7))
def test_curvature_antisymmetry(x, y, z, th):
    man = sphere()
    p = np.array([th, 0.1])
    a = riemann_curvature(man, p, tv(p, x), tv(p, y), tv(p, z)).components
    b = riemann_curvature(man, p, tv(p, y), tv(p, x), tv(p, z)).components
    np.testing.assert_allclose(a, -b, atol=1e-10)


@settings_small
@given(u=vec2, v=vec2)
def test_sectional_span_invariance(u, v):
    man = example2()
    p = np.array([0.1, 0.3])
    g = man.g(p)
    if (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2 < 1e-3:
        return
    assert sectional(man, p, u, v) == pytest.approx(sectional(man, p, u + v, v), abs=1e-8)


def test_degenerate_plane_raises():
    with pytest.raises(DegeneratePlaneError):
        sectional(sphere(), [1.0, 0.0], [1, 2], [2, 4])


# gradient, divergence, Laplacian, Hessian


def test_gradient_of_constant_is_zero():
    assert np.all(gradient(example2(), ScalarField.constant(3.0), [0.2, 0.3]).components == 0)


def test_example2_gradient():
    f = scalar_field_from_expression("x1 + x2", X)
    for p in ([0.0, 0.0], [0.5, -0.7]):
        p = np.array(p)
        got = gradient(example2(), f, p).components
        X_ = np.array([1.0, 1.0])  # e1 + e2 in coordinates is e^{-x2}(1, 1)
        np.testing.assert_allclose(got, math.exp(-p[1]) * math.exp(-p[1]) * X_, atol=1e-14)


def test_euclidean_gradient_of_square():
    f = scalar_field_from_expression("x1^2", X)
    np.testing.assert_allclose(gradient(euclid(), f, [3, 0]).components, [6, 0])
    fd = ScalarField(lambda p: p[0] ** 2, None, "fd")
    np.testing.assert_allclose(gradient(euclid(), fd, [3, 0]).components, [6, 0], atol=1e-9)


def test_divergence_examples():
    assert divergence(euclid(), vector_field_from_expressions(["x1", "x2"], X), [0.3, 0.4]) == pytest.approx(2.0)
    assert divergence(euclid(), VectorField.constant([1, 1]), [0.3, 0.4]) == 0.0


def test_divergence_frame_independence():
    man = example2()
    W = vector_field_from_expressions(["x1*x2", "sin(x1)"], X)
    p = np.array([0.3, -0.2])
    assert divergence(man, W, p, [0, 1]) == pytest.approx(divergence(man, W, p, [1, 0]), abs=1e-8)
    # coordinate formula div W = (1/sqrt g) d_i(sqrt g W^i) with sqrt g = e^{2 x2}
    oracle = p[1] + 2 * math.sin(p[0]) + 0.0
    assert divergence(man, W, p) == pytest.approx(oracle, abs=1e-9)


@pytest.mark.parametrize("src,value", [("x1^2 + x2^2", 4.0), ("3*x1 - x2", 0.0), ("x1^2 - x2^2", 0.0)])
def test_flat_laplacian(src, value):
    assert laplacian(euclid(), scalar_field_from_expression(src, X), [0.4, -0.3]) == pytest.approx(value, abs=1e-8)


def test_flat_hessian():
    p = np.array([0.2, 0.5])
    assert hessian(euclid(), scalar_field_from_expression("x1^2", X), tv(p, [1, 0]), tv(p, [1, 0])) == pytest.approx(2.0)
    assert hessian(euclid(), scalar_field_from_expression("x1 + 2*x2", X), tv(p, [1, 0]), tv(p, [0, 1])) == pytest.approx(0.0, abs=1e-9)


@settings_small
@given(u=vec2, v=vec2)
def test_hessian_symmetry(u, v):
    man = example2()
    f = scalar_field_from_expression("sin(x1)*x2 + x2^3", X)
    p = np.array([0.3, 0.2])
    assert abs(hessian(man, f, tv(p, u), tv(p, v)) - hessian(man, f, tv(p, v), tv(p, u))) <= 1e-6


# frames and brackets


def test_gram_schmidt_orthonormal_and_degenerate():
    g = np.array([[2.0, 0.3], [0.3, 1.0]])
    e = gram_schmidt(g, [[1, 0], [1, 1]])
    np.testing.assert_allclose(np.array(e) @ g @ np.array(e).T, np.eye(2), atol=1e-14)
    with pytest.raises(DegenerateFrameError):
        gram_schmidt(g, [[1, 2], [2, 4]])


def test_lie_bracket_of_coordinate_fields_and_rotation():
    d1 = VectorField.constant([1, 0])
    assert np.all(lie_bracket(d1, VectorField.constant([0, 1]), [0.1, 0.2]) == 0)
    rot = vector_field_from_expressions(["-x2", "x1"], X)
    np.testing.assert_allclose(lie_bracket(d1, rot, [0.1, 0.2]), [0, 1])
