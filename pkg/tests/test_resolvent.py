import numpy as np
import pytest

from alexflow import (
    ConvergenceFailure,
    GeodesicBall,
    InvalidArgument,
    Point,
    UnsupportedSpace,
    check_estimate_lower,
    check_estimate_upper,
    distance,
    distance_power,
    euclidean,
    geodesic_point,
    hyperbolic,
    prox_upper,
    sphere,
    spider,
    squared_distance,
    step_lower,
    weighted_sum,
)
from alexflow.functionals import concavity_constant, evaluate_many
from alexflow.oracle import grid_minimize
from alexflow.resolvent import argmin_on_region, optimality_residual
from alexflow.sampling import sample_region, sample_unit_tangents
from alexflow.spaces import _dist

from conftest import sph


def test_prox_euclidean_closed_form(E2):
    G = GeodesicBall(E2.base_point(), 10.0)
    a, x = Point(E2, [1.0, -1.0]), Point(E2, [3.0, 2.0])
    f = squared_distance(a, G)
    for lam in (0.1, 0.5, 3.0):
        step = prox_upper(f, lam, x, G)
        assert step.method == "closed_form"
        np.testing.assert_allclose(step.output.coords, (x.coords + 2 * lam * a.coords) / (1 + 2 * lam), atol=1e-14)


def test_prox_sphere_inductive_step(S2, cap):
    a, x = Point(S2, sph(0.5, 0.3)), Point(S2, sph(2.0, 0.4))
    f = squared_distance(a, cap)
    for k in (1, 2, 5, 50):
        step = prox_upper(f, 1 / (2 * k), x, cap)
        assert step.output.allclose(geodesic_point(x, a, 1 / (k + 1)), 1e-14)


def test_prox_iterative_matches_grid(S2, cap):
    anchors = [Point(S2, sph(0.2 + 2.1 * i, 0.3)) for i in range(3)]
    f = weighted_sum([squared_distance(a, cap) for a in anchors[:2]] + [distance_power(anchors[2], 1.0, cap, samples=500)],
                     [1.0, 0.5, 0.7])
    x = Point(S2, sph(4.0, 0.45))
    lam = 0.3
    step = prox_upper(f, lam, x, cap)
    assert step.method == "iterative"
    ref, _ = grid_minimize(lambda Y: _h(f, lam, x, Y), cap)
    assert distance(step.output, ref) < 1e-4
    dirs = sample_unit_tangents(S2, step.output.coords, 64, seed=0)
    assert optimality_residual(step, dirs) >= -1e-6


def _h(f, lam, x, Y):
    return evaluate_many(f, Y) + _dist(x.space, Y, x.coords) ** 2 / (2 * lam)


def test_prox_respects_region(E2):
    G = GeodesicBall(E2.base_point(), 1.0)
    f = squared_distance(Point(E2, [3.0, 0.0]), G)
    step = prox_upper(f, 10.0, Point(E2, [0.0, 0.0]), G)
    assert G.contains(step.output, 1e-10)
    ref, _ = grid_minimize(lambda Y: _h(f, 10.0, Point(E2, [0.0, 0.0]), Y), G)
    assert distance(step.output, ref) < 1e-4


def test_prox_soft_threshold(E2):
    G = GeodesicBall(E2.base_point(), 5.0)
    a, x = Point(E2, [0.0, 0.0]), Point(E2, [3.0, 4.0])
    f = distance_power(a, 1.0, G, samples=200)
    step = prox_upper(f, 2.0, x, G)
    assert step.method == "soft_threshold"
    np.testing.assert_allclose(step.output.coords, [1.8, 2.4])
    assert prox_upper(f, 7.0, x, G).output.allclose(a)


def test_prox_spider_matches_grid(T3):
    G = GeodesicBall(T3.base_point(), 2.0)
    f = weighted_sum([squared_distance(Point(T3, [0, 1.0]), G), squared_distance(Point(T3, [1, 1.5]), G)], [1.0, 2.0])
    for x in (Point(T3, [2, 1.0]), Point(T3, [0, 1.8]), Point(T3, [1, 0.2])):
        lam = 0.4
        step = prox_upper(f, lam, x, G)
        ref, _ = grid_minimize(lambda Y: _h(f, lam, x, Y), G, refinements=10)
        assert distance(step.output, ref) < 1e-4


def test_prox_errors(S2, E2):
    big = GeodesicBall(Point(S2, [1, 0, 0]), 0.9)
    f = squared_distance(Point(S2, [1, 0, 0]), big)
    with pytest.raises(InvalidArgument):
        prox_upper(f, 0.5, Point(S2, [1, 0, 0]), big)
    G = GeodesicBall(E2.base_point(), 1.0)
    with pytest.raises(InvalidArgument):
        prox_upper(squared_distance(E2.base_point(), G), 0.0, E2.base_point(), G)


def test_argmin_on_region(E2):
    G = GeodesicBall(E2.base_point(), 2.0)
    f = weighted_sum([squared_distance(Point(E2, [0.0, 0.0]), G), squared_distance(Point(E2, [1.0, 0.5]), G)], [1.0, 3.0])
    y = argmin_on_region(f, G, E2.base_point())
    np.testing.assert_allclose(y.coords, [0.75, 0.375], atol=1e-10)


def test_step_lower_examples(E2, S2, cap, T3):
    G = GeodesicBall(E2.base_point(), 5.0)
    a = Point(E2, [1.0, 2.0])
    f = squared_distance(a, G)
    assert step_lower(f, 0.3, a).output.allclose(a)
    assert step_lower(f, 0.5, Point(E2, [-1.0, 0.5])).output.allclose(a, 1e-14)
    fa = squared_distance(Point(S2, [1, 0, 0]), cap)
    x = Point(S2, sph(0.7, 0.4))
    lam = 0.05
    y = step_lower(fa, lam, x).output
    assert distance(x, y) == pytest.approx(2 * lam * 0.4, rel=1e-12)
    assert distance(y, Point(S2, [1, 0, 0])) == pytest.approx(0.4 - 2 * lam * 0.4, rel=1e-12)
    with pytest.raises(UnsupportedSpace):
        step_lower(squared_distance(T3.base_point(), GeodesicBall(T3.base_point(), 1.0)), 0.1, T3.base_point())


def test_estimate_examples():
    E1 = euclidean(1)
    G = GeodesicBall(E1.base_point(), 2.0)
    f = squared_distance(E1.base_point(), G)
    x, y = Point(E1, [1.0]), Point(E1, [0.0])
    up = prox_upper(f, 0.5, x, G)
    np.testing.assert_allclose(up.output.coords, [0.5])
    assert check_estimate_upper(up, y) == pytest.approx(0.5)
    assert check_estimate_upper(up, up.output) == pytest.approx(distance(up.output, x) ** 2)
    lo = step_lower(f, 0.25, x)
    np.testing.assert_allclose(lo.output.coords, [0.5])
    # 1 - (1/2)(1 - 0) + (K/2)(1/4 * 2)^2 - 1/4 with K = 0 gives 1/4
    assert check_estimate_lower(lo, y, 0.0) == pytest.approx(0.25)
    assert check_estimate_lower(step_lower(f, 0.0, x), y, 2.0) == 0.0
    with pytest.raises(InvalidArgument):
        check_estimate_upper(lo, y)


def _instances(space, n, seed):
    G = GeodesicBall(space.base_point(), 0.5)
    rng = np.random.default_rng(seed)
    A = sample_region(G, 3 * n, seed)
    X, Y = sample_region(G, n, seed + 1), sample_region(G, n, seed + 2)
    for i in range(n):
        w = rng.uniform(0.2, 1.5, 3)
        f = weighted_sum([squared_distance(Point(space, A[3 * i + j]), G, K=2.0 if space.kappa <= 0 else None)
                          for j in range(3)], w)
        yield G, f, float(rng.uniform(0.01, 0.5)), Point(space, X[i]), Point(space, Y[i])


@pytest.mark.parametrize("kind", ["euclidean", "hyperbolic", "sphere", "spider"])
def test_estimate_upper_sampled(kind):
    space = {"sphere": sphere(2), "hyperbolic": hyperbolic(2), "euclidean": euclidean(2), "spider": spider(3)}[kind]
    for G, f, lam, x, y in _instances(space, 40, 3):
        assert check_estimate_upper(prox_upper(f, lam, x, G), y) >= -1e-7


@pytest.mark.parametrize("kind", ["euclidean", "sphere", "hyperbolic"])
def test_estimate_lower_sampled(kind):
    space = {"sphere": sphere(2), "hyperbolic": hyperbolic(2), "euclidean": euclidean(2)}[kind]
    for G, f, lam, x, y in _instances(space, 60, 4):
        K = concavity_constant(G)
        lam = lam / (2 * sum(f.weights))
        assert check_estimate_lower(step_lower(f, lam, x), y, K) >= -1e-7


def test_concavity_zero_fails_flat_lower_estimate(E2):
    # with y = x the lower estimate reduces to (K/2)(lam |grad|)^2 - d(x, J)^2
    G = GeodesicBall(E2.base_point(), 1.0)
    f = squared_distance(Point(E2, [0.5, 0.0]), G)
    x = Point(E2, [-0.5, 0.0])
    step = step_lower(f, 0.1, x)
    assert check_estimate_lower(step, x, 0.0) < -1e-3
    assert check_estimate_lower(step, x, concavity_constant(G)) >= -1e-12


def test_convergence_failure_is_raised(monkeypatch, S2, cap):
    import alexflow.resolvent as R

    monkeypatch.setattr(R, "INNER_MAX_ITER", 1)
    f = weighted_sum([squared_distance(Point(S2, sph(0.0, 0.3)), cap), squared_distance(Point(S2, sph(2.0, 0.3)), cap)],
                     [1.0, 1.0])
    with pytest.raises(ConvergenceFailure) as e:
        prox_upper(f, 0.5, Point(S2, sph(4.0, 0.45)), cap)
    assert e.value.best is not None
