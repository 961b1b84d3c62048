import math

import numpy as np
import pytest

from clairaut.errors import NotASubmersionError, NotBasicError, PreconditionViolated
from clairaut.fields import map_from_expressions, metric_from_expressions, scalar_field_from_expression, vector_field_from_expressions
from clairaut.geometry import ChartManifold, ScalarField, VectorField, gradient_components, inner
from clairaut.scenarios import build_doubly_warped, get_scenario, load_scenario_text, scenario_names
from clairaut.submersion import (
    DilationField,
    SmoothSubmersionMap,
    a_components,
    a_formula_residual,
    check_conformal,
    harmonicity_check,
    mean_curvature,
    second_fundamental_form,
    sff_direct,
    split,
    tensor_A,
    tensor_T,
    tension_closed_form,
    tension_field,
    tension_trace,
    umbilical_residual,
)

X2 = ["x1", "x2"]


@pytest.fixture(scope="module")
def ex2():
    return get_scenario("example2")


@pytest.fixture(scope="module")
def dw():
    return get_scenario("doubly_warped_default")


def pts(sc, count=6, seed=42):
    return sc.sample_points(np.random.default_rng(seed), count)


def gnorm(man, p, w):
    return math.sqrt(max(inner(man, p, w, w), 0.0))


def U_field():
    # U = e1 - e2 with e_i = e^{-x2} d/dx_i
    return vector_field_from_expressions(["exp(-x2)", "-exp(-x2)"], X2, "U")


def X_field():
    return vector_field_from_expressions(["exp(-x2)", "exp(-x2)"], X2, "X")


# split


def test_example2_split(ex2):
    for p in pts(ex2):
        sp = split(ex2.map, p)
        v, h = sp.vertical[0], sp.horizontal[0]
        assert abs(v[0] + v[1]) <= 1e-12 * abs(v[0])
        assert abs(h[0] - h[1]) <= 1e-12 * abs(h[0])
        np.testing.assert_allclose(sp.basis @ ex2.total.g(p) @ sp.basis.T, np.eye(2), atol=1e-12)


def test_product_split_is_block_diagonal():
    sc = get_scenario("flat_product_4d")
    sp = split(sc.map, np.zeros(4))
    np.testing.assert_array_equal(sp.vertical, np.eye(4)[2:])
    np.testing.assert_array_equal(sp.horizontal, np.eye(4)[:2])


@pytest.mark.parametrize("name", scenario_names())
def test_split_orthogonality_and_kernel(name):
    sc = get_scenario(name)
    for p in pts(sc, 5):
        sp = split(sc.map, p)
        g = sc.total.g(p)
        assert np.max(np.abs(sp.vertical @ g @ sp.horizontal.T)) <= 1e-9
        assert np.max(np.abs(sc.map.J(p) @ sp.vertical.T)) <= 1e-9


def test_rank_deficient_map_is_rejected():
    man = ChartManifold(2, metric_from_expressions([[1, 0], [0, 1]], X2))
    base = ChartManifold(1, metric_from_expressions([[1]], ["y1"]))
    ev, jac = map_from_expressions(["x1^2"], X2)
    F = SmoothSubmersionMap(man, base, ev, jac, [VectorField.constant([0, 1])], [VectorField.constant([1, 0])])
    with pytest.raises(NotASubmersionError):
        split(F, [0.0, 0.3])
    split(F, [0.5, 0.3])


# dilation


def test_example2_dilation(ex2):
    P = pts(ex2, 20)
    rep = check_conformal(ex2.map, P, ex2.dilation)
    np.testing.assert_allclose(rep.lambdas, np.exp(-P[:, 1]), atol=1e-9)
    assert rep.residual_max <= 1e-9 and rep.conformal
    assert rep.analytic_mismatch <= 1e-9


def test_riemannian_product_has_unit_dilation():
    sc = get_scenario("euclidean_product")
    rep = check_conformal(sc.map, pts(sc))
    np.testing.assert_allclose(rep.lambdas, 1.0, atol=1e-15)


@pytest.mark.parametrize("name,lam", [("doubly_warped_default", lambda p: 1 / 1.5), ("doubly_warped_general", lambda p: 1 / (1.2 + 0.3 * math.sin(p[2])))])
def test_doubly_warped_dilation_is_inverse_warping(name, lam):
    sc = get_scenario(name)
    P = pts(sc)
    rep = check_conformal(sc.map, P)
    np.testing.assert_allclose(rep.lambdas, [lam(p) for p in P], atol=1e-12)
    assert rep.residual_max <= 1e-12


def test_non_conformal_map_detected():
    sc = load_scenario_text(
        """
name = stretched
[total]
dim = 3
g_1_1 = 1
g_2_2 = 4
g_3_3 = 1
[base]
dim = 2
g_1_1 = 1
g_2_2 = 1
[map]
y1 = x1
y2 = x2
[frames]
vertical_1 = 0, 0, 1
horizontal_1 = 1, 0, 0
horizontal_2 = 0, 1, 0
[flags]
conformal = false
""".replace("[flags]", "[sample_box]\nx1 = -1, 1\nx2 = -1, 1\nx3 = -1, 1\n[flags]")
    )
    assert not check_conformal(sc.map, pts(sc)).conformal


# O'Neill tensors


def test_example2_T_of_U(ex2):
    for p in pts(ex2, 20):
        T = tensor_T(ex2.map, U_field(), U_field(), p).components
        np.testing.assert_allclose(T, -math.exp(-p[1]) * X_field()(p), atol=1e-6)
        assert inner(ex2.total, p, U_field()(p), U_field()(p)) == pytest.approx(2.0, abs=1e-10)


@pytest.mark.parametrize("name", ["euclidean_product", "flat_product_4d"])
def test_product_tensors_vanish(name):
    sc = get_scenario(name)
    F = sc.map
    for p in pts(sc, 3):
        for E1 in list(F.vertical_frame) + list(F.horizontal_frame):
            for E2 in list(F.vertical_frame) + list(F.horizontal_frame):
                assert np.max(np.abs(tensor_T(F, E1, E2, p).components)) <= 1e-12
                assert np.max(np.abs(tensor_A(F, E1, E2, p).components)) <= 1e-12


@pytest.mark.parametrize("name,f1", [
    ("doubly_warped_default", "2 + sin(x1) + 0.5*x2^2"),
    ("doubly_warped_4d", "2.5 + 0.5*sin(x1) + 0.2*x2^2"),
])
def test_doubly_warped_fibers_are_umbilical(name, f1):
    sc = get_scenario(name)
    F = sc.map
    logf = scalar_field_from_expression(f"log({f1})", [f"x{i + 1}" for i in range(sc.m)])
    for p in pts(sc, 4):
        gl = gradient_components(sc.total, logf, p)
        glh = F.horizontal_part(p, gl)
        for U in F.vertical_frame:
            for V in F.vertical_frame:
                T = tensor_T(F, U, V, p).components
                np.testing.assert_allclose(T, -inner(sc.total, p, U(p), V(p)) * glh, atol=1e-6)
        np.testing.assert_allclose(mean_curvature(F, p).components, -glh, atol=1e-6)
        assert umbilical_residual(F, p) <= 1e-6


def test_example2_mean_curvature_is_normalized_T(ex2):
    for p in pts(ex2):
        u = U_field()(p) / math.sqrt(2)
        Un = VectorField(lambda x: U_field()(x) / math.sqrt(2), "U'")
        np.testing.assert_allclose(mean_curvature(ex2.map, p).components, tensor_T(ex2.map, Un, Un, p).components, atol=1e-9)
        np.testing.assert_allclose(mean_curvature(ex2.map, p).components, -0.5 * math.exp(-p[1]) * X_field()(p), atol=1e-6)
        assert np.allclose(u, Un(p))


def test_product_mean_curvature_zero():
    sc = get_scenario("flat_product_4d")
    assert np.max(np.abs(mean_curvature(sc.map, np.zeros(4)).components)) == 0.0
    assert umbilical_residual(sc.map, np.zeros(4)) == 0.0


def test_non_umbilical_fibers_detected():
    # fibers (x2, x3) with independently scaled axes: T_U U / |U|^2 differs between the two axes
    sc = load_scenario_text(
        """
name = anisotropic
[total]
dim = 3
g_1_1 = 1
g_2_2 = exp(2*x1)
g_3_3 = exp(-2*x1)
[base]
dim = 1
g_1_1 = 1
[map]
y1 = x1
[frames]
vertical_1 = 0, 1, 0
vertical_2 = 0, 0, 1
horizontal_1 = 1, 0, 0
[sample_box]
x1 = -1, 1
x2 = -1, 1
x3 = -1, 1
"""
    )
    for p in pts(sc, 3):
        # direct T values: T_{U2}U2 = -d/dx1 (x1) ... = -1 * d1 and T_{U3}U3 = +d1 for unit U2, U3
        U2 = VectorField(lambda x: np.array([0, math.exp(-x[0]), 0]), "U2")
        U3 = VectorField(lambda x: np.array([0, 0, math.exp(x[0])]), "U3")
        np.testing.assert_allclose(tensor_T(sc.map, U2, U2, p).components, [-1, 0, 0], atol=1e-8)
        np.testing.assert_allclose(tensor_T(sc.map, U3, U3, p).components, [1, 0, 0], atol=1e-8)
        assert umbilical_residual(sc.map, p) > 1e-3


def test_A_skew_symmetry(rng):
    sc = get_scenario("doubly_warped_general")
    F = sc.map
    for p in pts(sc, 4):
        x = rng.normal(size=2)
        y = rng.normal(size=2)
        X = VectorField.constant([x[0], x[1], 0])
        Y = VectorField.constant([y[0], y[1], 0])
        V = F.vertical_frame[0]
        lhs = inner(sc.total, p, a_components(F, p, X(p), Y), V(p))
        rhs = -inner(sc.total, p, Y(p), a_components(F, p, X(p), V))
        assert lhs == pytest.approx(rhs, abs=1e-6)


@pytest.mark.parametrize("name", ["doubly_warped_default", "doubly_warped_general", "example2", "doubly_warped_4d", "surface_of_revolution_default"])
def test_a_formula(name):
    sc = get_scenario(name)
    F, D = sc.map, sc.dilation_field()
    for p in pts(sc, 5):
        for X in F.horizontal_frame:
            for Y in F.horizontal_frame:
                assert a_formula_residual(F, D, X, Y, p) <= 1e-6


def test_example2_A_of_horizontal_is_conformal_term(ex2):
    # with n = 1 the bracket vanishes and only the dilation term survives
    F = ex2.map
    inv2 = scalar_field_from_expression("exp(2*x2)", X2)
    for p in pts(ex2):
        X = F.horizontal_frame[0]
        A = tensor_A(F, X, X, p).components
        w = F.vertical_part(p, gradient_components(ex2.total, inv2, p))
        expected = -0.5 * math.exp(-2 * p[1]) * inner(ex2.total, p, X(p), X(p)) * w
        np.testing.assert_allclose(A, expected, atol=1e-8)
        assert gnorm(ex2.total, p, A - F.vertical_part(p, A)) <= 1e-8


def test_doubly_warped_A_is_warping_gradient():
    sc = get_scenario("doubly_warped_general")
    F = sc.map
    loglam = scalar_field_from_expression("log(1.2 + 0.3*sin(x3))", ["x1", "x2", "x3"])
    for p in pts(sc, 4):
        gv = F.vertical_part(p, gradient_components(sc.total, loglam, p))
        for X in F.horizontal_frame:
            for Y in F.horizontal_frame:
                A = tensor_A(F, X, Y, p).components
                np.testing.assert_allclose(A, -inner(sc.total, p, X(p), Y(p)) * gv, atol=1e-5)


HEISENBERG = """
name = heisenberg
[total]
dim = 3
g_1_1 = 1
g_2_2 = 1 + x1^2
g_2_3 = -x1
g_3_3 = 1
[base]
dim = 2
g_1_1 = 1
g_2_2 = 1
[map]
y1 = x1
y2 = x2
[frames]
vertical_1 = 0, 0, 1
horizontal_1 = 1, 0, 0
horizontal_2 = 0, 1, x1
[dilation]
lambda = 1
[sample_box]
x1 = -1, 1
x2 = -1, 1
x3 = -1, 1
"""


def test_fiber_constant_dilation_reduces_A_to_half_bracket():
    # Riemannian submersion with non-integrable horizontal distribution: [X1, X2] = d/dx3
    sc = load_scenario_text(HEISENBERG)
    F, D = sc.map, sc.dilation_field()
    X1, X2_ = F.horizontal_frame
    for p in pts(sc, 4):
        np.testing.assert_allclose(a_components(F, p, X1(p), X2_), [0, 0, 0.5], atol=1e-6)
        np.testing.assert_allclose(a_components(F, p, X2_(p), X1), [0, 0, -0.5], atol=1e-6)
        assert a_formula_residual(F, D, X1, X2_, p) <= 1e-6


# second fundamental form and tension


def test_sff_vanishes_for_riemannian_submersion():
    sc = get_scenario("doubly_warped_4d")
    F, D = sc.map, sc.dilation_field()
    for p in pts(sc, 3):
        for X in F.horizontal_frame:
            v = second_fundamental_form(F, X, X, p, D)
            assert np.max(np.abs(v.formula)) <= 1e-12
            assert np.max(np.abs(v.value.components)) <= 1e-6


def test_example2_sff_direct_vs_formula(ex2):
    X = ex2.map.horizontal_frame[0]
    for p in pts(ex2, 10):
        assert second_fundamental_form(ex2.map, X, X, p, ex2.dilation).residual <= 1e-5


def test_homothetic_sff_term_by_term(dw):
    F, D = dw.map, dw.dilation
    for p in pts(dw, 3):
        for X in F.horizontal_frame:
            for Y in F.horizontal_frame:
                v = second_fundamental_form(F, X, Y, p, D)
                assert np.max(np.abs(v.formula)) <= 1e-14
                assert v.residual <= 1e-6


def test_non_basic_field_rejected(ex2):
    with pytest.raises(NotBasicError):
        second_fundamental_form(ex2.map, X_field(), X_field(), np.array([0.1, 0.2]), ex2.dilation)


@pytest.mark.parametrize("name", scenario_names())
def test_tension_trace_matches_closed_form(name):
    sc = get_scenario(name)
    for p in pts(sc, 4):
        assert tension_field(sc.map, p, sc.dilation_field()).residual <= 1e-5


def test_riemannian_minimal_is_harmonic():
    sc = get_scenario("euclidean_product")
    rep = harmonicity_check(sc.map, sc.clairaut_f, pts(sc), sc.dilation)
    assert rep.harmonic and rep.consistent and rep.residual_tension == 0.0


def test_homothetic_clairaut_tension_is_fiber_dim_times_pushed_gradient(dw):
    F = dw.map
    for p in pts(dw, 4):
        gf = gradient_components(dw.total, dw.clairaut_f, p)
        np.testing.assert_allclose(tension_trace(F, p), F.fiber_dim * F.push(p, gf), atol=1e-6)
    rep = harmonicity_check(F, dw.clairaut_f, pts(dw), dw.dilation)
    assert not rep.harmonic and rep.consistent
    assert rep.residual_tension == pytest.approx(rep.predicted_tension, rel=1e-5)


def test_constant_warping_function_is_harmonic():
    sc = build_doubly_warped([[1, 0], [0, 1]], [[1]], "2", "1.5", name="flat_warp")
    rep = harmonicity_check(sc.map, sc.clairaut_f, pts(sc), sc.dilation)
    assert rep.harmonic and rep.harmonic_by_f and rep.residual_tension <= 1e-9


def test_constant_potential_is_harmonic():
    sc = get_scenario("flat_product_4d")
    rep = harmonicity_check(sc.map, ScalarField.constant(1.0), pts(sc), sc.dilation)
    assert rep.harmonic


def test_example2_fails_harmonicity_hypotheses_and_is_harmonic(ex2):
    # lambda = e^{-x2} varies along the fibers, so the criterion linking f to tau does not apply;
    # the tension field itself vanishes identically
    with pytest.raises(PreconditionViolated) as info:
        harmonicity_check(ex2.map, ex2.clairaut_f, pts(ex2), ex2.dilation)
    assert info.value.hypothesis in ("homothetic", "fiber-constant dilation")
    for p in pts(ex2):
        assert ex2.map.base_norm(p, tension_trace(ex2.map, p)) <= 1e-9
        assert ex2.map.base_norm(p, tension_closed_form(ex2.map, ex2.dilation, p)) <= 1e-9


def test_dilation_must_be_positive():
    D = DilationField(ScalarField.constant(-1.0))
    with pytest.raises(PreconditionViolated):
        D(np.zeros(2))
