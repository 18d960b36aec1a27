import math

import numpy as np
import pytest

from alexflow import (
    GeodesicBall,
    MeasureSpec,
    Point,
    TangentVector,
    UnsupportedSpace,
    affine,
    distance,
    euclidean,
    fd_directional,
    grid_minimize,
    hyperbolic,
    sphere,
    squared_distance,
    verify_curvature,
    verify_k_convexity,
    verify_variance_inequality,
    weighted_sum,
)
from alexflow.oracle import grid_spacing

from conftest import sph


def test_grid_minimize_euclidean(E2):
    G = GeodesicBall(E2.base_point(), 1.0)
    a = Point(E2, [0.3, -0.2])
    p, v = grid_minimize(squared_distance(a, G), G)
    assert distance(p, a) <= grid_spacing(G)
    assert v <= grid_spacing(G) ** 2


def test_grid_minimize_sphere_symmetric(S2, cap):
    a, b = Point(S2, sph(0.0, 0.4)), Point(S2, sph(math.pi, 0.4))
    f = squared_distance(a, cap)
    g = squared_distance(b, cap)
    p, _ = grid_minimize(weighted_sum([f, g], [1, 1]), cap)
    assert distance(p, cap.center) <= grid_spacing(cap)


def test_grid_minimize_spider(T3):
    G = GeodesicBall(T3.base_point(), 2.0)
    f = weighted_sum([squared_distance(Point(T3, [0, 1.0]), G), squared_distance(Point(T3, [1, 1.0]), G)], [1, 1])
    p, _ = grid_minimize(f, G)
    assert distance(p, T3.base_point()) <= grid_spacing(G)


def test_grid_minimize_dimension_limit():
    E4 = euclidean(4)
    with pytest.raises(UnsupportedSpace):
        grid_minimize(lambda X: np.zeros(len(X)), GeodesicBall(E4.base_point(), 1.0))


def test_fd_directional(E2, S2, cap):
    G = GeodesicBall(E2.base_point(), 5.0)
    a = Point(E2, [1.0, 2.0])
    f = squared_distance(a, G)
    x = Point(E2, [4.0, 6.0])
    assert fd_directional(f, TangentVector(x, [1, 0], 0.0)) == 0.0
    assert fd_directional(f, TangentVector(x, [-0.6, -0.8], 1.0)) == pytest.approx(-10.0, abs=1e-8)


@pytest.mark.parametrize("kind", ["euclidean", "sphere", "hyperbolic"])
def test_curvature_equality_in_models(kind):
    space = {"sphere": sphere(2), "hyperbolic": hyperbolic(2), "euclidean": euclidean(2)}[kind]
    for side in ("upper", "lower"):
        r = verify_curvature(space, samples=2000, side=side)
        assert r.passed
        assert abs(r.min_margin) <= 1e-8


def test_curvature_spider_witness(T3):
    G = GeodesicBall(T3.base_point(), 1.0)
    assert verify_curvature(T3, G, samples=2000, side="upper").passed
    r = verify_curvature(T3, G, samples=2000, side="lower")
    assert r.min_margin < -0.1
    w = r.witness
    assert w["actual"] < w["comparison"]


def test_k_convexity_examples(E2, S2):
    G = GeodesicBall(E2.base_point(), 1.0)
    assert abs(verify_k_convexity(affine([1.0, 2.0], 0.0, G), K=0.0).min_margin) <= 1e-12
    r = verify_k_convexity(squared_distance(Point(E2, [0.2, 0.0]), G), K=2.0)
    assert abs(r.min_margin) <= 1e-12
    c = Point(S2, [1, 0, 0])
    Gs = GeodesicBall(c, math.pi / 8)
    f = squared_distance(c, Gs)
    assert f.K == pytest.approx(math.pi / 2)
    assert verify_k_convexity(f).passed


def test_k_convexity_negated(H2):
    G = GeodesicBall(H2.base_point(), 0.5)
    f = squared_distance(Point(H2, [math.cosh(0.3), math.sinh(0.3), 0.0]), G)
    assert verify_k_convexity(f, K=-4.0, negate=True).passed
    assert not verify_k_convexity(f, K=-1.0, negate=True).passed


def test_variance_inequality(E2, S2, cap):
    G = GeodesicBall(E2.base_point(), 1.0)
    mu = MeasureSpec.uniform([squared_distance(Point(E2, [-0.4, 0.1]), G), squared_distance(Point(E2, [0.5, 0.3]), G)])
    r = verify_variance_inequality(mu, samples=500)
    assert abs(r.min_margin) <= 1e-10 and abs(r.details["max_residual"]) <= 1e-10
    mu3 = MeasureSpec.uniform([squared_distance(Point(S2, sph(2.1 * i, 0.3)), cap) for i in range(3)])
    assert verify_variance_inequality(mu3, samples=1000).passed


def test_report_serializes(E2):
    r = verify_curvature(E2, samples=100)
    d = r.to_dict()
    assert d["passed"] is True and "witness" in d
