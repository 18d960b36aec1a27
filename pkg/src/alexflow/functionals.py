"""Convex functionals on a geodesic ball with convexity modulus and Lipschitz bound.

A :class:`FunctionalSpec` carries its region G, a convexity modulus K (the
largest constant for which the quadratic-defect inequality

    f(x #_t y) <= (1-t) f(x) + t f(y) - K/2 t(1-t) d(x,y)^2

is known on G) and a Lipschitz constant L valid on G.  K is *certified*
when it comes from a closed-form curvature bound and *sampled* otherwise.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import InvalidArgument, OutOfRegionWarning, UnsupportedSpace
from .sampling import sample_local_partners, sample_region
from .spaces import (
    GeodesicBall,
    Point,
    TangentVector,
    _dist,
    _geodesic,
    _log,
    _norm,
    distance,
    inner_product,
    log_map,
)

FUNCTIONAL_KINDS = ("squared_distance", "distance_power", "weighted_sum", "affine")


@dataclass(frozen=True)
class TermTable:
    """Flattened distance terms (anchors A, weights W, powers P) and the summed affine part."""

    A: np.ndarray
    W: np.ndarray
    P: np.ndarray
    coef: np.ndarray | None
    offset: float
    unit_powers: bool


@dataclass(frozen=True, eq=False)
class FunctionalSpec:
    kind: str
    region: GeodesicBall
    K: float
    L: float
    K_certified: bool = True
    anchor: Point | None = None
    p: float = 2.0
    components: tuple = ()
    weights: tuple = ()
    coef: np.ndarray | None = field(default=None, repr=False)
    offset: float = 0.0

    @property
    def space(self):
        return self.region.space

    def __call__(self, x: Point) -> float:
        return evaluate(self, x)

    def terms(self):
        """Flattened (weight, base functional) pairs."""
        if self.kind != "weighted_sum":
            return [(1.0, self)]
        out = []
        for w, comp in zip(self.weights, self.components):
            out.extend((w * v, base) for v, base in comp.terms())
        return out

    @cached_property
    def table(self) -> TermTable:
        dist = [(w, t) for w, t in self.terms() if t.kind != "affine"]
        aff = [(w, t) for w, t in self.terms() if t.kind == "affine"]
        dim = self.space.ambient_dim
        A = np.array([t.anchor.coords for _, t in dist], dtype=float).reshape(len(dist), dim)
        W = np.array([w for w, _ in dist], dtype=float)
        P = np.array([t.p for _, t in dist], dtype=float)
        coef = sum(w * t.coef for w, t in aff) if aff else None
        offset = float(sum(w * t.offset for w, t in aff))
        return TermTable(A, W, P, coef, offset, bool(np.all(P == 1.0)))

    def anchors(self) -> list[Point]:
        return [t.anchor for _, t in self.terms() if t.anchor is not None]

    @property
    def is_single_squared_distance(self) -> bool:
        terms = self.terms()
        return len(terms) == 1 and terms[0][1].kind in ("squared_distance", "distance_power") and (
            terms[0][1].p == 2.0
        )

    def to_dict(self) -> dict:
        if self.kind == "weighted_sum":
            return {
                "kind": "weighted_sum",
                "components": [c.to_dict() for c in self.components],
                "weights": list(self.weights),
            }
        if self.kind == "affine":
            return {"kind": "affine", "coef": [float(c) for c in self.coef], "offset": self.offset}
        d = {"kind": self.kind, "anchor": self.anchor.to_list()}
        if self.kind == "distance_power":
            d["p"] = self.p
        return d

    @classmethod
    def from_dict(cls, region: GeodesicBall, d: dict) -> "FunctionalSpec":
        kind = d.get("kind")
        space = region.space
        if kind == "squared_distance":
            return squared_distance(Point(space, d["anchor"]), region)
        if kind == "distance_power":
            return distance_power(Point(space, d["anchor"]), float(d["p"]), region)
        if kind == "affine":
            return affine(d["coef"], float(d.get("offset", 0.0)), region)
        if kind == "weighted_sum":
            comps = [cls.from_dict(region, c) for c in d["components"]]
            weights = d.get("weights") or [1.0] * len(comps)
            return weighted_sum(comps, weights)
        raise InvalidArgument(f"unknown functional kind {kind!r}")


# ---------------------------------------------------------------------------
# constants


def _anchor_reach(anchor: Point, region: GeodesicBall) -> float:
    """Largest distance from the anchor the convexity estimate has to cover.

    With the anchor inside G this is diam G; otherwise G sits in the ball
    around the anchor of radius d(a, c) + r and we cover twice that radius.
    """
    da = distance(anchor, region.center)
    if da <= region.radius + 1e-12:
        return region.diameter
    return 2.0 * (da + region.radius)


def sphere_k(kappa: float, reach: float) -> float:
    """(pi - 2 eps) tan(eps) with reach = (pi/2 - eps)/sqrt(kappa)."""
    eps = math.pi / 2 - reach * math.sqrt(kappa)
    if not 0 < eps < math.pi / 2:
        raise InvalidArgument("reach must satisfy 0 < reach < pi / (2 sqrt(kappa))")
    return (math.pi - 2 * eps) * math.tan(eps)


def certified_k(kind: str, region: GeodesicBall, anchor: Point | None = None, p: float = 2.0):
    """Convexity modulus of a base functional on ``region``.

    Returns ``(K, certified)``.  Squared distances get the closed-form
    constant for the space; other kinds return ``(None, False)`` and the
    caller falls back to :func:`sampled_k`.
    """
    space = region.space
    if kind == "affine":
        if space.kind != "euclidean":
            raise UnsupportedSpace("affine functionals live on euclidean space only")
        return 0.0, True
    if kind == "distance_power" and p == 2.0:
        kind = "squared_distance"
    if kind != "squared_distance":
        return None, False
    if space.kind in ("euclidean", "hyperbolic", "spider"):
        return 2.0, True
    reach = _anchor_reach(anchor, region) if anchor is not None else region.diameter
    if reach * math.sqrt(space.kappa) >= math.pi / 2:
        return None, False
    return sphere_k(space.kappa, reach), True


def concavity_constant(region: GeodesicBall) -> float:
    """K >= 0 such that -d_y^2 is (-K)-convex on the region.

    2 (1 - kappa (diam G)^2) for kappa < 0; for kappa >= 0 the flat value 2.
    """
    space = region.space
    if not space.has_lower_bound:
        raise UnsupportedSpace(f"{space.kind} has no lower curvature bound")
    if space.kappa < 0:
        return 2.0 * (1.0 - space.kappa * region.diameter**2)
    return 2.0


def convexity_defects(f, X, Y, t, K: float, negate: bool = False, space=None) -> np.ndarray:
    """(1-t) f(x) + t f(y) - K/2 t(1-t) d^2 - f(x #_t y) for batches of samples.

    ``f`` is a FunctionalSpec or a callable on coordinate arrays (then pass ``space``).
    """
    space = f.space if isinstance(f, FunctionalSpec) else space
    ev = (lambda Z: evaluate_many(f, Z)) if isinstance(f, FunctionalSpec) else f
    sign = -1.0 if negate else 1.0
    M = _geodesic(space, X, Y, t)
    d2 = _dist(space, X, Y) ** 2
    fx, fy, fm = sign * ev(X), sign * ev(Y), sign * ev(M)
    return (1 - t) * fx + t * fy - 0.5 * K * t * (1 - t) * d2 - fm


def sampled_k(f: "FunctionalSpec", samples: int = 10_000, seed: int = 0) -> float:
    """Smallest K consistent with the convexity inequality over sampled triples."""
    region = f.region
    half = samples // 2
    X = sample_region(region, samples, seed, boundary_fraction=0.25)
    Y = np.concatenate([
        sample_region(region, half, seed + 1, boundary_fraction=0.25),
        sample_local_partners(region, X[half:], 0.1 * region.radius, seed + 2),
    ])
    t = np.random.default_rng(seed).uniform(0.05, 0.95, samples)
    d2 = _dist(f.space, X, Y) ** 2
    keep = d2 > 1e-10
    base = convexity_defects(f, X[keep], Y[keep], t[keep], 0.0)
    return float(np.min(2.0 * base / (t[keep] * (1 - t[keep]) * d2[keep])))


def _lipschitz(anchor: Point, p: float, region: GeodesicBall) -> float:
    da = distance(anchor, region.center)
    reach = region.diameter if da <= region.radius + 1e-12 else da + region.radius
    return p * reach ** (p - 1)


# ---------------------------------------------------------------------------
# constructors


def _build_base(kind, anchor, p, region, K=None, samples=10_000, seed=0):
    if anchor.space != region.space:
        raise InvalidArgument("anchor and region live in different spaces")
    L = _lipschitz(anchor, p, region)
    if K is not None:
        return FunctionalSpec(kind, region, float(K), L, True, anchor, p)
    Kc, ok = certified_k(kind, region, anchor, p)
    f = FunctionalSpec(kind, region, 0.0 if Kc is None else Kc, L, ok, anchor, p)
    if ok:
        return f
    Ks = sampled_k(f, samples, seed)
    return FunctionalSpec(kind, region, Ks, L, False, anchor, p)


def squared_distance(anchor: Point, region: GeodesicBall, K: float | None = None) -> FunctionalSpec:
    """d(., anchor)^2.  Passing ``K`` overrides the certified modulus."""
    return _build_base("squared_distance", anchor, 2.0, region, K)


def distance_power(anchor: Point, p: float, region: GeodesicBall, samples=10_000, seed=0):
    if not p >= 1:
        raise InvalidArgument("distance powers need p >= 1")
    return _build_base("distance_power", anchor, float(p), region, None, samples, seed)


def affine(coef, offset: float, region: GeodesicBall) -> FunctionalSpec:
    space = region.space
    if space.kind != "euclidean":
        raise UnsupportedSpace("affine functionals live on euclidean space only")
    c = np.asarray(coef, dtype=float).reshape(-1)
    if c.shape != (space.dim,):
        raise InvalidArgument("affine coefficient has the wrong dimension")
    c.setflags(write=False)
    return FunctionalSpec("affine", region, 0.0, float(np.linalg.norm(c)), True, coef=c, offset=offset)


def weighted_sum(components, weights) -> FunctionalSpec:
    components = tuple(components)
    weights = tuple(float(w) for w in weights)
    if not components or len(components) != len(weights):
        raise InvalidArgument("need one weight per component")
    if any(w < 0 for w in weights):
        raise InvalidArgument("weights must be nonnegative")
    region = components[0].region
    for c in components[1:]:
        if c.region is not region and (
            c.space != region.space
            or c.region.radius != region.radius
            or distance(c.region.center, region.center) > 0
        ):
            raise InvalidArgument("components must share one region")
    K = sum(w * c.K for w, c in zip(weights, components))
    L = sum(w * c.L for w, c in zip(weights, components))
    certified = all(c.K_certified for c in components)
    return FunctionalSpec("weighted_sum", region, K, L, certified, components=components, weights=weights)


# ---------------------------------------------------------------------------
# evaluation


def evaluate_many(f: FunctionalSpec, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    tab = f.table
    total = np.zeros(X.shape[:-1])
    if tab.coef is not None:
        total = total + (X @ tab.coef + tab.offset)
    if len(tab.W):
        D = _dist(f.space, X[..., None, :], tab.A)
        total = total + (D if tab.unit_powers else D**tab.P) @ tab.W
    return total


def evaluate(f: FunctionalSpec, x: Point) -> float:
    if x.space != f.space:
        raise InvalidArgument("point and functional live in different spaces")
    if not f.region.contains(x, 1e-9):
        warnings.warn("evaluating outside the functional's region", OutOfRegionWarning, stacklevel=2)
    return float(evaluate_many(f, x.coords))


def directional_derivative(f: FunctionalSpec, v: TangentVector) -> float:
    """Closed-form one-sided derivative of f at v.base in direction v."""
    if v.magnitude == 0.0:
        return 0.0
    x = v.base
    total = 0.0
    for w, t in f.terms():
        if t.kind == "affine":
            total += w * float(np.dot(t.coef, v.vector))
            continue
        d = distance(x, t.anchor)
        if d == 0.0:
            if t.p == 1.0:
                total += w * v.magnitude
            continue
        total -= w * t.p * d ** (t.p - 2) * inner_product(v, log_map(x, t.anchor))
    return total


@dataclass(frozen=True)
class GradientInfo:
    absolute_gradient: float
    descent_direction: TangentVector


def _gradient_parts(f: FunctionalSpec, X):
    """Ambient gradient of the smooth part of f at a point X and the total
    weight of distance (p = 1) terms whose anchor sits exactly at X."""
    space = f.space
    if not space.is_manifold:
        raise UnsupportedSpace("gradients need a manifold space")
    X = np.asarray(X, dtype=float)
    tab = f.table
    g = np.zeros_like(X) if tab.coef is None else np.array(tab.coef, dtype=float)
    if not len(tab.W):
        return g, 0.0
    D = _dist(space, X, tab.A)
    at = D == 0.0
    kink = float(tab.W[at & (tab.P == 1.0)].sum()) if at.any() else 0.0
    safe = np.where(at, 1.0, D)
    c = np.where(at, 0.0, tab.W * tab.P * safe ** (tab.P - 2.0))
    return g - c @ _log(space, X, tab.A), kink


def min_norm_subgradient(g: np.ndarray, kink: float, space) -> np.ndarray:
    """Shortest element of g + kink * (unit ball)."""
    if kink <= 0.0:
        return g
    n = float(_norm(space, g))
    if n <= kink:
        return np.zeros_like(g)
    return g * (1.0 - kink / n)


def gradient_of_minus_f(f: FunctionalSpec, x: Point) -> GradientInfo:
    """The gradient vector of -f at x: the steepest descent direction of f,
    scaled by the absolute gradient |grad_- f|(x)."""
    if not f.space.has_lower_bound:
        raise UnsupportedSpace(f"{f.space.kind} has no lower curvature bound")
    g, kink = _gradient_parts(f, x.coords)
    g = min_norm_subgradient(g, kink, f.space)
    v = TangentVector.from_vector(x, -g)
    return GradientInfo(v.magnitude, v)
