"""Model Alexandrov spaces with exact geodesic primitives.

Four model spaces are supported:

* ``euclidean`` -- R^n, curvature bounded above and below by 0.
* ``sphere`` -- the n-sphere of curvature kappa > 0 (radius 1/sqrt(kappa)),
  embedded in R^(n+1).
* ``hyperbolic`` -- hyperbolic n-space of curvature kappa < 0 in the
  hyperboloid model, <x, x>_M = 1/kappa with x_0 > 0.
* ``spider`` -- m >= 3 half-lines glued at a branch point.  A metric tree,
  so curvature is bounded above by 0 but has no lower bound.

The private ``_dist``/``_log``/``_exp``/``_geodesic`` kernels work on
coordinate arrays of shape ``(..., D)`` so that the oracle module can evaluate
whole grids at once; the public functions wrap them for single points.
Spider coordinates are ``(leg, r)`` with ``r`` the distance from the branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument, NonUniqueGeodesic, UnsupportedSpace

KINDS = ("euclidean", "sphere", "hyperbolic", "spider")

# Exact-geometry identities are checked at this level; see DESIGN notes in README.
GEOMETRY_TOL = 1e-10
# Constraint-surface tolerance accepted before renormalizing user coordinates.
_CONSTRAINT_SLACK = 1e-6


@dataclass(frozen=True)
class SpaceDescriptor:
    """Which model space, its dimension and its curvature parameter.

    For the spider ``dim`` is the number of legs.
    """

    kind: str
    dim: int
    kappa: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidArgument(f"unknown space kind {self.kind!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidArgument("dimension must be a positive integer")
        object.__setattr__(self, "dim", int(self.dim))
        object.__setattr__(self, "kappa", float(self.kappa))
        if self.kind == "euclidean" and self.kappa != 0.0:
            raise InvalidArgument("euclidean space has kappa = 0")
        if self.kind == "sphere" and not self.kappa > 0:
            raise InvalidArgument("sphere needs kappa > 0")
        if self.kind == "hyperbolic" and not self.kappa < 0:
            raise InvalidArgument("hyperbolic space needs kappa < 0")
        if self.kind == "spider":
            if self.dim < 3:
                raise InvalidArgument("a spider needs at least 3 legs")
            if self.kappa != 0.0:
                raise InvalidArgument("spider is modelled with upper bound kappa = 0")

    @property
    def bound(self) -> str:
        return "upper" if self.kind == "spider" else "both"

    @property
    def has_upper_bound(self) -> bool:
        return True

    @property
    def has_lower_bound(self) -> bool:
        return self.kind != "spider"

    @property
    def is_manifold(self) -> bool:
        return self.kind != "spider"

    @property
    def legs(self) -> int:
        if self.kind != "spider":
            raise InvalidArgument("only a spider has legs")
        return self.dim

    @property
    def scale(self) -> float:
        """Radius 1/sqrt(|kappa|) of the curved models (1 for flat ones)."""
        if self.kappa == 0.0:
            return 1.0
        return 1.0 / math.sqrt(abs(self.kappa))

    @property
    def ambient_dim(self) -> int:
        if self.kind == "euclidean":
            return self.dim
        if self.kind == "spider":
            return 2
        return self.dim + 1

    @property
    def injectivity_radius(self) -> float:
        if self.kind == "sphere":
            return math.pi * self.scale
        return math.inf

    def point(self, coords) -> "Point":
        return Point(self, coords)

    def base_point(self) -> "Point":
        """A canonical point: the origin, north pole, hyperboloid vertex or branch."""
        if self.kind == "spider":
            return Point(self, (0, 0.0))
        x = np.zeros(self.ambient_dim)
        if self.kind != "euclidean":
            x[0] = self.scale
        return Point(self, x)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "kappa": self.kappa}

    @classmethod
    def from_dict(cls, d: dict) -> "SpaceDescriptor":
        kind = d["kind"]
        dim = d.get("dim", d.get("legs"))
        if dim is None:
            raise InvalidArgument("space needs 'dim' (or 'legs' for a spider)")
        default = {"sphere": 1.0, "hyperbolic": -1.0}.get(kind, 0.0)
        return cls(kind, int(dim), float(d.get("kappa", default)))


def euclidean(dim: int) -> SpaceDescriptor:
    return SpaceDescriptor("euclidean", dim, 0.0)


def sphere(dim: int = 2, kappa: float = 1.0) -> SpaceDescriptor:
    return SpaceDescriptor("sphere", dim, kappa)


def hyperbolic(dim: int = 2, kappa: float = -1.0) -> SpaceDescriptor:
    return SpaceDescriptor("hyperbolic", dim, kappa)


def spider(legs: int = 3) -> SpaceDescriptor:
    return SpaceDescriptor("spider", legs, 0.0)


# ---------------------------------------------------------------------------
# coordinate kernels


def _enorm(V):
    """Euclidean norm over the last axis (cheaper than np.linalg.norm on tiny arrays)."""
    if V.ndim == 1:
        return np.float64(math.sqrt(V @ V))
    return np.sqrt(np.einsum("...i,...i->...", V, V))


def _minkowski(u, v):
    return np.sum(u[..., 1:] * v[..., 1:], axis=-1) - u[..., 0] * v[..., 0]


def _dot(space: SpaceDescriptor, u, v):
    """Riemannian inner product of ambient tangent vectors."""
    if space.kind == "hyperbolic":
        return _minkowski(u, v)
    return np.sum(u * v, axis=-1)


def _norm(space, v):
    return np.sqrt(np.maximum(_dot(space, v, v), 0.0))


def _normalize(space: SpaceDescriptor, X):
    """Push coordinates back onto the constraint surface."""
    X = np.asarray(X, dtype=float)
    if space.kind == "sphere":
        return X * (space.scale / _enorm(X)[..., None])
    if space.kind == "hyperbolic":
        X = X.copy()
        X[..., 0] = np.sqrt(space.scale**2 + np.sum(X[..., 1:] ** 2, axis=-1))
        return X
    if space.kind == "spider":
        X = X.copy()
        X[..., 0] = np.where(X[..., 1] <= 0.0, 0.0, np.rint(X[..., 0]))
        X[..., 1] = np.maximum(X[..., 1], 0.0)
        return X
    return X


def _dist(space: SpaceDescriptor, X, Y):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    kind = space.kind
    if kind == "euclidean":
        return _enorm(X - Y)
    if kind == "sphere":
        R = space.scale
        # 2 atan2(|u-w|, |u+w|) is accurate at every angle, unlike arccos.
        return 2.0 * R * np.arctan2(
            _enorm(X - Y), _enorm(X + Y)
        )
    if kind == "hyperbolic":
        R = space.scale
        D = X - Y
        chord = np.sqrt(np.maximum(_minkowski(D, D), 0.0)) / R
        return 2.0 * R * np.arcsinh(chord / 2.0)
    same = X[..., 0] == Y[..., 0]
    return np.where(same, np.abs(X[..., 1] - Y[..., 1]), X[..., 1] + Y[..., 1])


def _log(space: SpaceDescriptor, X, Y):
    """Ambient tangent vector at X pointing to Y with length d(X, Y)."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if space.kind == "euclidean":
        return Y - X
    if space.kind == "spider":
        raise UnsupportedSpace("spider tangent vectors are not ambient vectors")
    R = space.scale
    u, w = X / R, Y / R
    d = _dist(space, X, Y)
    if space.kind == "sphere":
        perp = w - np.sum(u * w, axis=-1, keepdims=True) * u
        if np.any(d > R * (math.pi - 1e-9)):
            raise NonUniqueGeodesic("antipodal points have no unique minimal geodesic")
    else:
        perp = w + _minkowski(u, w)[..., None] * u
    n = _norm(space, perp)
    safe = np.where(n > 0.0, n, 1.0)
    return perp * (d / safe)[..., None]


def _exp(space: SpaceDescriptor, X, V):
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    if space.kind == "euclidean":
        return X + V
    if space.kind == "spider":
        raise UnsupportedSpace("use exp_map with a TangentVector on a spider")
    R = space.scale
    s = _norm(space, V)
    safe = np.where(s > 0.0, s, 1.0)[..., None]
    theta = (s / R)[..., None]
    if space.kind == "sphere":
        out = np.cos(theta) * X + np.sin(theta) * R * (V / safe)
    else:
        out = np.cosh(theta) * X + np.sinh(theta) * R * (V / safe)
    return _normalize(space, out)


def _geodesic(space: SpaceDescriptor, X, Y, t):
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    t = np.asarray(t, dtype=float)
    if space.kind == "euclidean":
        tt = t[..., None]
        return (1.0 - tt) * X + tt * Y
    if space.kind == "spider":
        d = _dist(space, X, Y)
        s = t * d
        lx, rx = X[..., 0], X[..., 1]
        ly, ry = Y[..., 0], Y[..., 1]
        same = lx == ly
        r_same = rx + t * (ry - rx)
        on_x = s <= rx
        leg = np.where(same, lx, np.where(on_x, lx, ly))
        r = np.where(same, r_same, np.where(on_x, rx - s, s - rx))
        return _normalize(space, np.stack(np.broadcast_arrays(leg, r), axis=-1))
    V = _log(space, X, Y)
    return _exp(space, X, t[..., None] * V)


def _tangent_basis(space: SpaceDescriptor, X):
    """Orthonormal basis (rows) of the tangent space at a single point X."""
    X = np.asarray(X, dtype=float)
    n = space.dim
    if space.kind == "euclidean":
        return np.eye(n)
    if space.kind == "spider":
        raise UnsupportedSpace("spider has no tangent basis")
    R = space.scale
    u = X / R
    basis = []
    candidates = np.eye(n + 1)
    for e in candidates:
        if space.kind == "sphere":
            v = e - np.dot(e, u) * u
        else:
            v = e + _minkowski(u, e) * u
        for b in basis:
            v = v - _dot(space, v, b) * b
        nv = _norm(space, v)
        if nv > 1e-8:
            basis.append(v / nv)
        if len(basis) == n:
            break
    return np.array(basis)


# ---------------------------------------------------------------------------
# values


@dataclass(frozen=True, eq=False)
class Point:
    """A point of a model space; coordinates are normalized on construction."""

    space: SpaceDescriptor
    coords: np.ndarray

    def __post_init__(self):
        space = self.space
        x = np.array(self.coords, dtype=float).reshape(-1)
        if x.shape != (space.ambient_dim,):
            raise InvalidArgument(
                f"{space.kind} points need {space.ambient_dim} coordinates, got {x.shape[0]}"
            )
        if not np.all(np.isfinite(x)):
            raise InvalidArgument("coordinates must be finite")
        if space.kind == "sphere":
            R = space.scale
            if abs(np.linalg.norm(x) - R) > _CONSTRAINT_SLACK * max(R, 1.0):
                raise InvalidArgument("sphere point is not on the sphere of radius 1/sqrt(kappa)")
        elif space.kind == "hyperbolic":
            R = space.scale
            if x[0] <= 0 or abs(_minkowski(x, x) + R * R) > _CONSTRAINT_SLACK * max(R * R, 1.0) * (
                1.0 + x[0] * x[0]
            ):
                raise InvalidArgument("hyperbolic point is not on the upper hyperboloid sheet")
        elif space.kind == "spider":
            leg, r = x
            if r < 0 or leg != int(leg) or not 0 <= leg < space.dim:
                raise InvalidArgument("spider point needs leg in [0, m) and r >= 0")
        x = _normalize(space, x)
        x.setflags(write=False)
        object.__setattr__(self, "coords", x)

    @classmethod
    def _trusted(cls, space: SpaceDescriptor, coords) -> "Point":
        """Wrap coordinates produced by the kernels without re-validation."""
        p = object.__new__(cls)
        x = np.array(coords, dtype=float)
        x.setflags(write=False)
        object.__setattr__(p, "space", space)
        object.__setattr__(p, "coords", x)
        return p

    @property
    def leg(self) -> int:
        return int(self.coords[0])

    @property
    def r(self) -> float:
        return float(self.coords[1])

    @property
    def is_branch(self) -> bool:
        return self.space.kind == "spider" and self.coords[1] == 0.0

    def to_list(self) -> list:
        if self.space.kind == "spider":
            return [self.leg, self.r]
        return [float(c) for c in self.coords]

    def allclose(self, other: "Point", tol: float = GEOMETRY_TOL) -> bool:
        return distance(self, other) <= tol

    def __repr__(self):
        return f"Point({self.space.kind}, {self.to_list()})"


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A vector of the tangent cone at ``base``.

    On manifolds ``direction`` is a unit ambient vector tangent at ``base``
    (Minkowski-unit on the hyperboloid).  On a spider it is an int: at the
    branch point the leg index to move along, elsewhere +1 (away from the
    branch) or -1 (towards it).  Magnitude 0 is the cone origin and ignores
    the direction.
    """

    base: Point
    direction: object
    magnitude: float

    def __post_init__(self):
        mag = float(self.magnitude)
        if not mag >= 0.0:
            raise InvalidArgument("tangent magnitude must be nonnegative")
        object.__setattr__(self, "magnitude", mag)
        space = self.base.space
        if space.kind == "spider":
            code = int(self.direction) if self.direction is not None else 0
            if mag > 0:
                if self.base.is_branch:
                    if not 0 <= code < space.dim:
                        raise InvalidArgument("at the branch point the direction is a leg index")
                elif code not in (1, -1):
                    raise InvalidArgument("off the branch the direction is +1 or -1")
            object.__setattr__(self, "direction", code)
            return
        d = np.zeros(space.ambient_dim) if self.direction is None else np.array(
            self.direction, dtype=float
        ).reshape(-1)
        if d.shape != (space.ambient_dim,):
            raise InvalidArgument("direction has the wrong number of coordinates")
        if mag > 0:
            if space.kind != "euclidean":
                u = self.base.coords / space.scale
                # keep the direction tangent to the constraint surface
                if space.kind == "sphere":
                    d = d - np.dot(d, u) * u
                else:
                    d = d + _minkowski(u, d) * u
            n = float(_norm(space, d))
            if abs(n - 1.0) > 1e-6:
                raise InvalidArgument("direction must have unit norm")
            d = d / n
        d.setflags(write=False)
        object.__setattr__(self, "direction", d)

    @classmethod
    def from_vector(cls, base: Point, v) -> "TangentVector":
        """Build from an ambient tangent vector whose length is the magnitude."""
        v = np.asarray(v, dtype=float)
        n = float(_norm(base.space, v))
        if n == 0.0:
            return cls(base, None, 0.0)
        return cls(base, v / n, n)

    @property
    def vector(self) -> np.ndarray:
        if self.base.space.kind == "spider":
            raise UnsupportedSpace("spider tangent vectors have no ambient form")
        return self.magnitude * np.asarray(self.direction)

    def scaled(self, c: float) -> "TangentVector":
        if c < 0:
            raise InvalidArgument("tangent cone vectors scale by nonnegative factors")
        return TangentVector(self.base, self.direction, self.magnitude * c)


@dataclass(frozen=True, eq=False)
class GeodesicBall:
    """The closed ball of ``radius`` around ``center``.

    With ``for_upper=True`` the ball must qualify as a region for
    upper-bound flows: on a sphere, diameter below pi / (2 sqrt(kappa)).
    """

    center: Point
    radius: float
    for_upper: bool = field(default=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidArgument("ball radius must be positive")
        object.__setattr__(self, "radius", float(self.radius))
        space = self.center.space
        if space.kind == "sphere" and self.radius >= math.pi * space.scale / 2:
            raise InvalidArgument("a sphere ball must have radius below pi/(2 sqrt(kappa))")
        if self.for_upper:
            self.require_upper()

    @property
    def space(self) -> SpaceDescriptor:
        return self.center.space

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def require_upper(self) -> None:
        space = self.space
        if space.kind == "sphere" and not self.diameter < math.pi / (2 * math.sqrt(space.kappa)):
            raise InvalidArgument(
                f"region diameter {self.diameter:.6g} must be below pi/(2 sqrt(kappa)) "
                "for upper-bound flows"
            )

    def contains(self, x: Point, tol: float = 1e-12) -> bool:
        return distance(self.center, x) <= self.radius + tol

    def to_dict(self) -> dict:
        return {"center": self.center.to_list(), "radius": self.radius}

    @classmethod
    def from_dict(cls, space: SpaceDescriptor, d: dict, for_upper=False) -> "GeodesicBall":
        return cls(Point(space, d["center"]), float(d["radius"]), for_upper)


# ---------------------------------------------------------------------------
# public operations


def _same_space(x: Point, y: Point) -> None:
    if x.space != y.space:
        raise InvalidArgument(f"points live in different spaces: {x.space} vs {y.space}")


def distance(x: Point, y: Point) -> float:
    _same_space(x, y)
    return float(_dist(x.space, x.coords, y.coords))


def geodesic_point(x: Point, y: Point, t: float) -> Point:
    """The point x #_t y a fraction t along the minimal geodesic from x to y."""
    _same_space(x, y)
    if not 0.0 <= t <= 1.0:
        raise InvalidArgument("t must lie in [0, 1]")
    if t == 0.0:
        return x
    if t == 1.0:
        return y
    return Point._trusted(x.space, _geodesic(x.space, x.coords, y.coords, t))


def log_map(x: Point, y: Point) -> TangentVector:
    _same_space(x, y)
    space = x.space
    if space.kind == "spider":
        d = distance(x, y)
        if d == 0.0:
            return TangentVector(x, 0, 0.0)
        if x.is_branch:
            return TangentVector(x, y.leg, d)
        if y.leg == x.leg and y.r > x.r:
            return TangentVector(x, 1, d)
        return TangentVector(x, -1, d)
    return TangentVector.from_vector(x, _log(space, x.coords, y.coords))


def exp_map(v: TangentVector) -> Point:
    x = v.base
    space = x.space
    if v.magnitude == 0.0:
        return x
    if space.kind == "spider":
        if x.is_branch:
            return Point(space, (v.direction, v.magnitude))
        r = x.r + v.direction * v.magnitude
        if r < -1e-15:
            raise InvalidArgument("spider step passes the branch point; the leg is ambiguous")
        return Point(space, (x.leg, max(r, 0.0)))
    return Point._trusted(space, _exp(space, x.coords, v.vector))


def grad_exp(v: TangentVector) -> Point:
    """Gradient exponential: the exponential map, clamped at the sphere's antipode."""
    space = v.base.space
    if not space.has_lower_bound:
        raise UnsupportedSpace(f"{space.kind} has no lower curvature bound")
    if space.kind == "sphere" and v.magnitude >= space.injectivity_radius:
        return Point(space, -v.base.coords)
    return exp_map(v)


def inner_product(u: TangentVector, v: TangentVector) -> float:
    if u.base is not v.base and distance(u.base, v.base) > 0.0:
        raise InvalidArgument("tangent vectors have different base points")
    if u.magnitude == 0.0 or v.magnitude == 0.0:
        return 0.0
    st = u.magnitude * v.magnitude
    if u.base.space.kind == "spider":
        if u.base.is_branch:
            return st if u.direction == v.direction else -st
        return st * u.direction * v.direction
    return st * float(_dot(u.base.space, u.direction, v.direction))


def _hav(x):
    return np.sin(x / 2.0) ** 2


def comparison_distance(d_xy: float, d_yz: float, d_zx: float, t: float, kappa: float) -> float:
    """Distance from x~ to y~ #_t z~ in the comparison triangle in M^2(kappa).

    Uses the haversine form of Stewart's relation, which stays accurate for
    thin and small triangles.
    """
    sides = np.array([d_xy, d_yz, d_zx], dtype=float)
    if np.any(sides < 0) or not np.all(np.isfinite(sides)):
        raise InvalidArgument("side lengths must be finite and nonnegative")
    if not 0.0 <= t <= 1.0:
        raise InvalidArgument("t must lie in [0, 1]")
    slack = 1e-9 * max(1.0, sides.max())
    a, b, c = d_yz, d_zx, d_xy
    if a > b + c + slack or b > a + c + slack or c > a + b + slack:
        raise InvalidArgument("sides violate the triangle inequality")
    if kappa > 0 and sides.sum() >= 2 * math.pi / math.sqrt(kappa):
        raise InvalidArgument("perimeter must be below 2 pi / sqrt(kappa)")
    if t == 0.0:
        return float(d_xy)
    if t == 1.0:
        return float(d_zx)
    return float(_comparison_many(d_xy, d_yz, d_zx, t, kappa))


def _comparison_many(d_xy, d_yz, d_zx, t, kappa: float):
    """Vectorized comparison distance without argument validation."""
    a, b, c, t = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (d_yz, d_zx, d_xy, t)))
    u = 1.0 - t
    if kappa == 0.0:
        return np.sqrt(np.maximum(u * c * c + t * b * b - t * u * a * a, 0.0))
    s = math.sqrt(abs(kappa))
    a, b, c = a * s, b * s, c * s
    degenerate = a == 0.0
    a = np.where(degenerate, 1.0, a)
    if kappa > 0:
        sn, half = np.sin, _hav
    else:
        sn, half = np.sinh, lambda x: np.sinh(x / 2.0) ** 2
    h = (
        half(c) * sn(u * a)
        + half(b) * sn(t * a)
        - sn(u * a) * half(t * a)
        - sn(t * a) * half(u * a)
    ) / sn(a)
    if kappa > 0:
        d = 2.0 * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0))) / s
    else:
        d = 2.0 * np.arcsinh(np.sqrt(np.maximum(h, 0.0))) / s
    return np.where(degenerate, c / s, d)


def project_to_ball(x: Point, G: GeodesicBall) -> Point:
    d = distance(G.center, x)
    if d <= G.radius:
        return x
    return geodesic_point(G.center, x, G.radius / d)


def spider_leg_interval(G: GeodesicBall, leg: int) -> tuple[float, float] | None:
    """Range of distance-from-branch values on ``leg`` that lie inside G."""
    c = G.center
    if c.is_branch or c.leg == leg:
        lo = max(0.0, c.r - G.radius)
        return lo, c.r + G.radius
    if G.radius >= c.r:
        return 0.0, G.radius - c.r
    return None
