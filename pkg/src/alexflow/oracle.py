"""Brute-force and finite-difference oracles.

Everything here is deliberately independent of the code it certifies: the
grid minimizer never calls a resolvent, and finite differences only evaluate
the functional along exponential-map curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, UnsupportedSpace
from .functionals import FunctionalSpec, convexity_defects, evaluate_many
from .sampling import sample_local_partners, sample_region
from .spaces import (
    GeodesicBall,
    Point,
    SpaceDescriptor,
    TangentVector,
    _comparison_many,
    _dist,
    _exp,
    _geodesic,
    _tangent_basis,
    spider_leg_interval,
)

CURVATURE_TOL = 1e-8
CONVEXITY_TOL = 1e-8
VARIANCE_TOL = 1e-7
DEFAULT_TS = tuple(np.round(np.arange(1, 10) / 10, 1))


@dataclass
class CheckReport:
    """Outcome of a sampled inequality check: the worst margin and where it occurred."""

    check: str
    min_margin: float
    tolerance: float
    samples: int
    witness: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.min_margin >= -self.tolerance

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "passed": self.passed,
            "min_margin": self.min_margin,
            "tolerance": self.tolerance,
            "samples": self.samples,
            "witness": self.witness,
            **self.details,
        }


def _rows(X) -> list:
    return [[float(v) for v in row] for row in np.atleast_2d(X)]


# ---------------------------------------------------------------------------
# grid minimization


def default_resolution(space: SpaceDescriptor) -> int:
    if not space.is_manifold:
        return 201
    if space.dim <= 2:
        return 201
    if space.dim == 3:
        return 61
    raise UnsupportedSpace("dense grids are limited to dimension 3")


def grid_spacing(G: GeodesicBall, resolution: int | None = None) -> float:
    """Distance between neighbouring nodes of the initial grid."""
    n = resolution or default_resolution(G.space)
    return G.diameter / (n - 1)


def _evaluator(f):
    if isinstance(f, FunctionalSpec):
        return lambda X: evaluate_many(f, X)
    return f


def grid_minimize(f, G: GeodesicBall, resolution: int | None = None, refinements: int = 5):
    """Exhaustive minimization of f over a grid of G, then local refinement.

    Manifold balls use a cartesian grid in normal coordinates at the center,
    clipped to the ball; each refinement pass searches a 5^dim stencil around
    the incumbent with half the previous spacing.  Spider balls use a 1-D
    grid per leg.  Ties go to the lowest grid index.  ``f`` is a
    FunctionalSpec or a callable on coordinate arrays.

    Returns ``(point, value)``.
    """
    space = G.space
    n = resolution or default_resolution(space)
    if n < 2:
        raise InvalidArgument("grid resolution must be at least 2")
    ev = _evaluator(f)
    h = grid_spacing(G, n)
    if space.kind == "spider":
        return _grid_spider(ev, G, n, h, refinements)
    dim = space.dim
    if dim > 3:
        raise UnsupportedSpace("dense grids are limited to dimension 3")
    c = G.center.coords
    axis = np.linspace(-G.radius, G.radius, n)
    C = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    C = C[np.linalg.norm(C, axis=1) <= G.radius * (1 + 1e-12)]
    X = _exp(space, np.broadcast_to(c, (len(C), c.size)), C @ _tangent_basis(space, c))
    vals = ev(X)
    i = int(np.argmin(vals))
    best, best_val = X[i], float(vals[i])

    steps = np.arange(-2, 3)
    stencil = np.stack(np.meshgrid(*([steps] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    for j in range(1, refinements + 1):
        V = (stencil * (h / 2**j)) @ _tangent_basis(space, best)
        Y = _exp(space, np.broadcast_to(best, V.shape), V)
        Y = Y[_dist(space, c, Y) <= G.radius]
        if len(Y) == 0:
            continue
        vals = ev(Y)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best, best_val = Y[k], float(vals[k])
    return Point(space, best), best_val


def _grid_spider(ev, G, n, h, refinements):
    space = G.space
    X = []
    for leg in range(space.dim):
        iv = spider_leg_interval(G, leg)
        if iv is None:
            continue
        rs = np.linspace(iv[0], iv[1], n)
        X.append(np.column_stack([np.full(n, float(leg)), rs]))
    X = np.concatenate(X)
    X[X[:, 1] == 0.0, 0] = 0.0
    vals = ev(X)
    i = int(np.argmin(vals))
    best, best_val = X[i].copy(), float(vals[i])
    for j in range(1, refinements + 1):
        step = h / 2**j
        cand = []
        legs = range(space.dim) if best[1] == 0.0 else [int(best[0])]
        for leg in legs:
            iv = spider_leg_interval(G, leg)
            if iv is None:
                continue
            rs = np.clip(best[1] + step * np.arange(-2, 3), iv[0], iv[1])
            cand.append(np.column_stack([np.full(rs.size, float(leg)), rs]))
        Y = np.concatenate(cand)
        Y[Y[:, 1] == 0.0, 0] = 0.0
        vals = ev(Y)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best, best_val = Y[k].copy(), float(vals[k])
    return Point(space, best), best_val


# ---------------------------------------------------------------------------
# finite differences


def _curve(v: TangentVector):
    """s -> coordinates of the point at arclength s along v's direction."""
    x = v.base
    space = x.space
    if space.kind == "spider":
        if x.is_branch:
            leg, sign, room = v.direction, 1.0, math.inf
        else:
            leg, sign = x.leg, float(v.direction)
            room = x.r if sign < 0 else math.inf
        return (lambda s: np.array([leg, x.r + sign * s], dtype=float)), room
    u = np.asarray(v.direction)
    room = space.injectivity_radius / 4
    return (lambda s: _exp(space, x.coords, s * u)), room


def fd_directional(f, v: TangentVector, orders: int = 4, h0: float | None = None,
                   return_error: bool = False):
    """Richardson-extrapolated forward difference of f along ``v``.

    Tabulates (f(c(h)) - f(c(0))) / h for h = h0, h0/2, ... and eliminates
    the O(h), O(h^2), ... error terms.  The last two diagonal entries give an
    error estimate; when rounding dominates (tiny steps) that estimate is what
    the result is good to.
    """
    if v.magnitude == 0.0:
        return (0.0, 0.0) if return_error else 0.0
    space = v.base.space
    ev = _evaluator(f)
    curve, room = _curve(v)
    if h0 is None:
        h0 = 1e-2 * (space.scale if space.kappa != 0 else 1.0)
    h0 = min(h0, room / 2)
    if not h0 > 0:
        raise InvalidArgument("no room to step in this direction")
    f0 = float(ev(curve(0.0)[None, :])[0])
    table = []
    for i in range(orders + 1):
        h = h0 / 2**i
        row = [(float(ev(curve(h)[None, :])[0]) - f0) / h]
        for j in range(1, i + 1):
            row.append(row[j - 1] + (row[j - 1] - table[i - 1][j - 1]) / (2**j - 1))
        table.append(row)
    est = table[-1][-1]
    err = abs(est - table[-2][-2]) if orders > 0 else math.nan
    val = est * v.magnitude
    return (val, err * v.magnitude) if return_error else val


# ---------------------------------------------------------------------------
# sampled inequality checks


def default_region(space: SpaceDescriptor) -> GeodesicBall:
    """A unit ball around the base point (radius 1.0 stays inside the sphere's limits)."""
    return GeodesicBall(space.base_point(), min(1.0, 0.45 * math.pi * space.scale))


def verify_curvature(space: SpaceDescriptor, region: GeodesicBall | None = None,
                     samples: int = 10_000, side: str = "upper", seed: int = 0,
                     ts=DEFAULT_TS, tolerance: float = CURVATURE_TOL) -> CheckReport:
    """Sampled triangle comparison: d(y #_t z, x) against the model triangle.

    The margin is comparison - actual for ``side='upper'`` and
    actual - comparison for ``side='lower'``.
    """
    if side not in ("upper", "lower"):
        raise InvalidArgument("side is 'upper' or 'lower'")
    G = region or default_region(space)
    if G.space != space:
        raise InvalidArgument("region belongs to another space")
    if space.kappa > 0 and 3 * G.diameter >= 2 * math.pi * space.scale:
        raise InvalidArgument("region too large: triangle perimeters must stay below 2 pi / sqrt(kappa)")
    X = sample_region(G, samples, seed, boundary_fraction=0.2)
    Y = sample_region(G, samples, seed + 1, boundary_fraction=0.2)
    Z = sample_region(G, samples, seed + 2, boundary_fraction=0.2)
    dxy, dyz, dzx = _dist(space, X, Y), _dist(space, Y, Z), _dist(space, Z, X)
    worst, wit = math.inf, {}
    for t in ts:
        M = _geodesic(space, Y, Z, t)
        actual = _dist(space, X, M)
        comp = _comparison_many(dxy, dyz, dzx, t, space.kappa)
        margin = comp - actual if side == "upper" else actual - comp
        i = int(np.argmin(margin))
        if margin[i] < worst:
            worst = float(margin[i])
            wit = {
                "x": _rows(X[i])[0], "y": _rows(Y[i])[0], "z": _rows(Z[i])[0], "t": float(t),
                "actual": float(actual[i]), "comparison": float(comp[i]),
            }
    return CheckReport(
        f"curvature[{space.kind},{side}]", worst, tolerance, samples * len(ts), wit,
        {"space": space.to_dict(), "region": G.to_dict(), "side": side},
    )


def verify_k_convexity(f: FunctionalSpec, region: GeodesicBall | None = None,
                       K: float | None = None, samples: int = 1000, seed: int = 0,
                       negate: bool = False, tolerance: float = CONVEXITY_TOL) -> CheckReport:
    """Minimum defect of the K-convexity inequality over sampled geodesics.

    Half of the pairs are independent samples of G (a quarter on its
    boundary); the other half are short segments, where a too-large K shows
    up through the second-order term.  ``negate`` checks -f instead of f.
    """
    G = region or f.region
    K = f.K if K is None else float(K)
    space = G.space
    half = samples // 2
    X = sample_region(G, samples, seed, boundary_fraction=0.25)
    Y = np.concatenate([
        sample_region(G, half, seed + 1, boundary_fraction=0.25),
        sample_local_partners(G, X[half:], 0.1 * G.radius, seed + 2),
    ])
    t = np.random.default_rng(seed + 3).uniform(0.0, 1.0, samples)
    defects = convexity_defects(f, X, Y, t, K, negate=negate, space=space)
    i = int(np.argmin(defects))
    wit = {"x": _rows(X[i])[0], "y": _rows(Y[i])[0], "t": float(t[i]), "defect": float(defects[i])}
    name = f"k_convexity[{space.kind},K={K:g}{',negated' if negate else ''}]"
    return CheckReport(name, float(defects[i]), tolerance, samples, wit, {"K": K, "negate": negate})


def verify_variance_inequality(mu, samples: int = 1000, seed: int = 0, expectation: Point | None = None,
                               tolerance: float = VARIANCE_TOL) -> CheckReport:
    """(2/K) [g(x) - g(E mu)] - d(x, E mu)^2 over sampled x, g the mu-average.

    ``mu`` is a MeasureSpec; the expectation is computed when not supplied.
    """
    if not mu.K > 0:
        raise InvalidArgument("the variance inequality needs K > 0")
    g = mu.functional()
    if expectation is None:
        from .flows import expectation_and_variance

        expectation, _ = expectation_and_variance(mu)
    G = g.region
    space = G.space
    X = np.concatenate([expectation.coords[None, :], sample_region(G, samples, seed, 0.25)])
    gx, ge = evaluate_many(g, X), float(evaluate_many(g, expectation.coords))
    res = (2.0 / mu.K) * (gx - ge) - _dist(space, X, expectation.coords) ** 2
    i = int(np.argmin(res))
    wit = {"x": _rows(X[i])[0], "expectation": expectation.to_list(), "residual": float(res[i])}
    return CheckReport(
        f"variance[{space.kind}]", float(res[i]), tolerance, len(X), wit,
        {"K": mu.K, "max_residual": float(np.max(res))},
    )
