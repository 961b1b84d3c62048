import csv
import io
import math

import numpy as np
import pytest

import oracles
from clairaut.errors import IntegrationDivergedError, MetricSingularityError
from clairaut.fields import metric_from_expressions
from clairaut.geodesic import GeodesicState, exponential_map, geodesic_rhs, integrate
from clairaut.geometry import ChartManifold, MetricField, connection_term

X = ["x1", "x2"]
BACKENDS = ["numba", "numpy"]


def euclid():
    return ChartManifold(2, metric_from_expressions([[1, 0], [0, 1]], X))


def example2():
    return ChartManifold(2, metric_from_expressions([["exp(2*x2)", 0], [0, "exp(2*x2)"]], X))


def sphere():
    return ChartManifold(2, metric_from_expressions([[1, 0], [0, "sin(x1)^2"]], X))


def unit(man, p, v):
    v = np.asarray(v, float)
    return v / math.sqrt(v @ man.g(p) @ v)


def test_flat_rhs_is_zero():
    dx, dv = geodesic_rhs(euclid(), GeodesicState(0, [1, 2], [0.3, -0.4]))
    np.testing.assert_array_equal(dx, [0.3, -0.4])
    np.testing.assert_array_equal(dv, [0, 0])


def test_example2_rhs_from_christoffel_table():
    v = np.array([1.0, -1.0])
    _, dv = geodesic_rhs(example2(), GeodesicState(0, [0, 0], v))
    G = oracles.example2_christoffel()
    expected = -np.array([sum(G[k, i, j] * v[i] * v[j] for i in range(2) for j in range(2)) for k in range(2)])
    np.testing.assert_allclose(dv, expected, atol=1e-15)
    np.testing.assert_allclose(dv, [2.0, 0.0], atol=1e-15)


def test_rhs_is_minus_connection_term(rng):
    man = sphere()
    for _ in range(10):
        p = np.array([rng.uniform(0.3, 2.8), rng.uniform(-3, 3)])
        v = rng.normal(size=2)
        _, dv = geodesic_rhs(man, GeodesicState(0, p, v))
        G = oracles.christoffel_loops(oracles.sphere_metric, p)
        np.testing.assert_allclose(dv, -np.einsum("kij,i,j->k", G, v, v), atol=1e-8)
        np.testing.assert_allclose(dv, -connection_term(man, p, v, v), atol=0)


@pytest.mark.parametrize("backend", BACKENDS)
def test_flat_straight_line(backend):
    tr = integrate(euclid(), GeodesicState(0, [0, 0], [1, 0]), 1.0, backend=backend)
    np.testing.assert_allclose(tr.endpoint, [1, 0], atol=1e-14)
    np.testing.assert_allclose(tr.points[:, 1], 0, atol=0)
    for t, x in zip(tr.times, tr.points):
        np.testing.assert_allclose(x, oracles.straight_line([0, 0], [1, 0], t), atol=1e-13)


@pytest.mark.parametrize("backend", BACKENDS)
def test_equator_half_turn_is_antipodal(backend):
    end = exponential_map(sphere(), [math.pi / 2, 0.0], [0.0, 1.0], math.pi, backend=backend)
    np.testing.assert_allclose(end, [math.pi / 2, math.pi], atol=1e-6)


@pytest.mark.parametrize("backend", BACKENDS)
def test_sphere_matches_great_circle(backend, rng):
    man = sphere()
    for _ in range(3):
        p = np.array([rng.uniform(0.8, 2.3), rng.uniform(-1, 1)])
        v = unit(man, p, rng.normal(size=2))
        end = exponential_map(man, p, v, 0.5, backend=backend)
        np.testing.assert_allclose(end, oracles.great_circle_endpoint(p, v, 0.5), atol=1e-9)


def test_sphere_period_returns_home():
    man = sphere()
    p = np.array([math.pi / 2, 0.3])
    # tilted great circle that stays away from the coordinate poles
    v = unit(man, p, [0.3, 1.0])
    end = exponential_map(man, p, v, 2 * math.pi)
    wrapped = np.array([end[0], p[1] + math.remainder(end[1] - p[1], 2 * math.pi)])
    np.testing.assert_allclose(wrapped, p, atol=1e-5)


def test_exponential_map_trivial_cases():
    p = np.array([0.2, 0.4])
    np.testing.assert_array_equal(exponential_map(example2(), p, [0, 0], 1.0), p)
    np.testing.assert_allclose(exponential_map(euclid(), p, [1.5, -2], 0.7), p + 0.7 * np.array([1.5, -2]), atol=1e-13)
    back = exponential_map(example2(), exponential_map(example2(), p, [0.3, 0.2], 1.0), [0, 0], 0)
    assert back.shape == (2,)


@pytest.mark.parametrize("backend", BACKENDS)
def test_example2_speed_conservation(backend, rng):
    man = example2()
    for _ in range(5):
        p = rng.uniform(-1, 1, 2)
        v = unit(man, p, rng.normal(size=2))
        tr = integrate(man, GeodesicState(0, p, v), 1.0, 1e-3, backend=backend)
        assert tr.speed_drift <= 1e-8
        assert tr.backend == backend


def test_step_halving_error_ratio():
    man = example2()
    s = GeodesicState(0, [0.1, -0.2], unit(man, np.array([0.1, -0.2]), [0.6, 0.8]))
    ref = integrate(man, s, 1.0, 1e-3 / 8).endpoint
    e1 = np.linalg.norm(integrate(man, s, 1.0, 0.02).endpoint - ref)
    e2 = np.linalg.norm(integrate(man, s, 1.0, 0.01).endpoint - ref)
    assert e1 / e2 >= 8


def test_trace_shape_and_csv():
    tr = integrate(example2(), GeodesicState(0.5, [0, 0], [1, 0]), 0.51, 1e-3)
    assert len(tr) == 11
    assert tr.times[0] == 0.5 and tr.times[-1] == pytest.approx(0.51)
    rows = list(csv.reader(io.StringIO(tr.to_csv())))
    assert rows[0] == ["t", "x1", "x2", "v1", "v2", "speed2"]
    assert len(rows) == 12
    assert float(rows[-1][1]) == tr.endpoint[0]
    assert tr.state(3).t == tr.times[3]


def test_invalid_arguments():
    with pytest.raises(ValueError):
        integrate(euclid(), GeodesicState(0, [0, 0], [1, 0]), 1.0, step=0)
    with pytest.raises(ValueError):
        integrate(euclid(), GeodesicState(1, [0, 0], [1, 0]), 0.5)
    with pytest.raises(ValueError):
        GeodesicState(0, [0, 0], [1, math.nan])
    with pytest.raises(ValueError):
        integrate(euclid(), GeodesicState(0, [0, 0], [1, 0]), 1.0, backend="fortran")


@pytest.mark.parametrize("backend", BACKENDS)
def test_running_into_a_singularity(backend):
    # conformal factor 1/x1^2 vanishes nowhere but the chart ends at x1 = 0
    man = ChartManifold(2, metric_from_expressions([["x1", 0], [0, "x1"]], X))
    with pytest.raises((MetricSingularityError, IntegrationDivergedError)) as info:
        integrate(man, GeodesicState(0, [0.5, 0], [-1, 0]), 5.0, backend=backend)
    assert 0 < info.value.time < 5


def test_metric_without_program_uses_numpy():
    base = metric_from_expressions([["exp(2*x2)", 0], [0, "exp(2*x2)"]], X)
    man = ChartManifold(2, MetricField(2, base.eval, base.partials))
    tr = integrate(man, GeodesicState(0, [0, 0], [1, 0]), 0.1, backend="numba")
    assert tr.backend == "numpy"
