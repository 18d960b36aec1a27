"""Resolvent maps and their per-step inequality certificates.

Two resolvents are implemented:

* :func:`prox_upper` -- the Moreau-Yosida step
  ``argmin_{y in G} f(y) + d(x, y)^2 / (2 lam)`` for upper curvature bounds;
* :func:`step_lower` -- the gradient-exponential step
  ``g-exp(lam * grad(-f)(x))`` for lower curvature bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceFailure, InvalidArgument, UnsupportedSpace
from .functionals import (
    FunctionalSpec,
    _gradient_parts,
    directional_derivative,
    evaluate_many,
    gradient_of_minus_f,
    min_norm_subgradient,
)
from .spaces import (
    GeodesicBall,
    Point,
    TangentVector,
    _dist,
    _dot,
    _exp,
    _log,
    _norm,
    distance,
    geodesic_point,
    grad_exp,
    inner_product,
    log_map,
    project_to_ball,
    spider_leg_interval,
)

INNER_TOL = 1e-10
INNER_MAX_ITER = 10_000


@dataclass
class ResolventStep:
    input: Point
    output: Point
    lam: float
    mode: str
    f_value_in: float
    f_value_out: float
    functional: FunctionalSpec = field(repr=False)
    abs_gradient: float = float("nan")
    method: str = ""
    certificate: dict = field(default_factory=dict)
    _displacement: float | None = field(default=None, repr=False)

    @property
    def displacement(self) -> float:
        if self._displacement is None:
            self._displacement = distance(self.input, self.output)
        return self._displacement

    def to_row(self) -> dict:
        return {
            "mode": self.mode,
            "lambda": self.lam,
            "f_in": self.f_value_in,
            "f_out": self.f_value_out,
            "displacement": self.displacement,
            **self.certificate,
        }


def _f(f: FunctionalSpec, x: Point) -> float:
    return float(evaluate_many(f, x.coords))


def _check_upper(f: FunctionalSpec, G: GeodesicBall) -> None:
    if f.space != G.space:
        raise InvalidArgument("functional and region live in different spaces")
    G.require_upper()


def _finish_upper(f, lam, x, y, G, method, **cert):
    fx, fy = _f(f, x), _f(f, y)
    step = ResolventStep(x, y, lam, "upper_prox", fx, fy, f, method=method)
    # staying put can never be better than the resolvent
    step.certificate["prox_descent"] = fx - fy - step.displacement**2 / (2 * lam)
    step.certificate.update(cert)
    return step


def prox_upper(f: FunctionalSpec, lam: float, x: Point, G: GeodesicBall) -> ResolventStep:
    """Moreau-Yosida resolvent of f with step ``lam`` over the region G."""
    if not lam > 0:
        raise InvalidArgument("lambda must be positive")
    _check_upper(f, G)
    terms = f.terms()
    if len(terms) == 1 and terms[0][1].kind != "affine":
        w, base = terms[0]
        a = base.anchor
        if base.p == 2.0 and w > 0:
            y = geodesic_point(x, a, 2 * lam * w / (1 + 2 * lam * w))
            if G.contains(y, 1e-12):
                return _finish_upper(f, lam, x, y, G, "closed_form")
        elif base.p == 1.0 and w > 0:
            D = distance(x, a)
            s = min(lam * w, D)
            y = geodesic_point(x, a, s / D) if D > 0 else x
            if G.contains(y, 1e-12):
                return _finish_upper(f, lam, x, y, G, "soft_threshold")
    y, cert = prox_iterative(f, lam, x, G)
    return _finish_upper(f, lam, x, y, G, "iterative", **cert)


# ---------------------------------------------------------------------------
# iterative inner solvers


def _h(f, lam, x_coords, Y):
    if math.isinf(lam):
        return evaluate_many(f, Y)
    return evaluate_many(f, Y) + _dist(f.space, x_coords, Y) ** 2 / (2 * lam)


def _h_gradient(f, lam, x_coords, y_coords):
    g, kink = _gradient_parts(f, y_coords)
    if not math.isinf(lam) and _dist(f.space, y_coords, x_coords) > 0:
        g = g - _log(f.space, y_coords, x_coords) / lam
    return g, kink


def prox_iterative(f: FunctionalSpec, lam: float, x: Point, G: GeodesicBall):
    """General proximal subproblem; returns ``(point, certificate)``.

    ``lam = inf`` drops the proximity term and minimizes f itself over G,
    starting from x.
    """
    if f.space.kind == "spider":
        return _prox_spider(f, lam, x, G)
    return _prox_manifold(f, lam, x, G)


def argmin_on_region(f: FunctionalSpec, G: GeodesicBall, start: Point) -> Point:
    """High-accuracy minimizer of f over G by descent from ``start``."""
    return prox_iterative(f, math.inf, start, G)[0]


def _prox_manifold(f, lam, x, G):
    """Projected Riemannian gradient descent on h(y) = f(y) + d(x,y)^2/(2 lam).

    A step is accepted on Armijo decrease or, once value differences drown in
    rounding, on decrease of the projected gradient norm; the subproblem is
    strongly convex so either test certifies progress.
    """
    space = f.space
    xc = x.coords
    # a kink of a p = 1 term can itself be the minimizer
    for w, t in f.terms():
        if t.kind == "distance_power" and t.p == 1.0 and G.contains(t.anchor, 0.0):
            g, kink = _h_gradient(f, lam, xc, t.anchor.coords)
            if float(_norm(space, min_norm_subgradient(g, kink, space))) == 0.0:
                return t.anchor, {"inner_iterations": 0, "inner_residual": 0.0}

    def stationarity(y):
        g, kink = _h_gradient(f, lam, xc, y)
        g = min_norm_subgradient(g, kink, space)
        return g, _projected_residual(space, G, y, g)

    center, radius = G.center.coords, G.radius
    y = project_to_ball(x, G).coords
    hy = float(_h(f, lam, xc, y))
    g, res = stationarity(y)
    smooth = sum(w * max(t.p, 1.0) for w, t in f.terms() if t.kind != "affine")
    # safe step for the smooth parts; backtracking covers the rest
    eta = eta_max = 1.0 / (1.0 / lam + 2.0 * smooth + 1e-300)
    for it in range(1, INNER_MAX_ITER + 1):
        if res <= 1e-14:
            break
        while True:
            cand = _exp(space, y, -eta * g)
            dc = float(_dist(space, center, cand))
            if dc > radius:
                cand = _project_coords(space, center, cand, radius, dc)
            hc = float(_h(f, lam, xc, cand))
            move = float(_dist(space, y, cand))
            gc, rc = stationarity(cand)
            if hc <= hy - 0.25 * move * move / eta or (hc <= hy + 1e-15 * abs(hy) and rc < res):
                break
            eta *= 0.5
            if eta < 1e-300:
                raise ConvergenceFailure("proximal line search collapsed", Point(space, y), res)
        y, hy, g, res = cand, hc, gc, rc
        if move < 1e-13:
            break
        eta = min(1.5 * eta, eta_max)
    else:
        raise ConvergenceFailure("proximal inner solver hit its iteration cap", Point(space, y), res)
    return Point(space, y), {"inner_iterations": it, "inner_residual": res}


def _project_coords(space, center, Y, radius, d):
    V = _log(space, center, Y)
    return _exp(space, center, V * (radius / d))


def _projected_residual(space, G, y, g):
    """Norm of the gradient with its outward normal part removed on the boundary."""
    gn = float(_norm(space, g))
    d = float(_dist(space, G.center.coords, y))
    if d < G.radius - 1e-9 or gn == 0.0:
        return gn
    out = -_log(space, y, G.center.coords) / d  # outward unit normal
    nc = float(_dot(space, g, out))
    if nc < 0:  # -g points outward: the constraint is active
        g = g - nc * out
    return float(_norm(space, g))


def _spider_slope(f, lam, x, leg, r):
    """Right derivative of h along ``leg`` at distance r from the branch."""
    p = Point(f.space, (leg, r))
    v = TangentVector(p, leg if r == 0 else 1, 1.0)
    dh = directional_derivative(f, v)
    if not math.isinf(lam) and distance(p, x) > 0:
        dh -= inner_product(v, log_map(p, x)) / lam
    return dh


def _prox_spider(f, lam, x, G):
    """Per-leg bisection on the monotone slope of the convex restriction of h,
    then comparison across legs; exact ties go to the lowest leg index."""
    space = f.space
    xc = x.coords
    candidates = []
    for leg in range(space.dim):
        iv = spider_leg_interval(G, leg)
        if iv is None:
            continue
        lo, hi = iv
        if _spider_slope(f, lam, x, leg, lo) >= 0:
            r = lo
        elif _spider_slope(f, lam, x, leg, hi) <= 0:
            r = hi
        else:
            a, b = lo, hi
            while True:
                m = 0.5 * (a + b)
                if m <= a or m >= b:
                    break
                if _spider_slope(f, lam, x, leg, m) < 0:
                    a = m
                else:
                    b = m
            r = a if _h(f, lam, xc, np.array([leg, a])) <= _h(f, lam, xc, np.array([leg, b])) else b
        hv = float(_h(f, lam, xc, np.array([leg, r], dtype=float)))
        candidates.append((hv, leg, r))
    best = min(candidates, key=lambda c: (c[0], c[1]))
    ties = sum(1 for hv, leg, r in candidates if hv == best[0] and leg != best[1] and r > 0)
    y = Point(space, (best[1], best[2]))
    return y, {"inner_iterations": 0, "inner_residual": 0.0, "leg_ties": float(ties)}


# ---------------------------------------------------------------------------
# lower bound


def step_lower(f: FunctionalSpec, lam: float, x: Point) -> ResolventStep:
    """Gradient-exponential resolvent: shoot along grad(-f)(x) for length lam |grad_- f|."""
    if not lam >= 0:
        raise InvalidArgument("lambda must be nonnegative")
    if not f.space.has_lower_bound:
        raise UnsupportedSpace(f"{f.space.kind} has no lower curvature bound")
    info = gradient_of_minus_f(f, x)
    if not math.isfinite(info.absolute_gradient):
        raise InvalidArgument("absolute gradient is infinite")
    y = grad_exp(info.descent_direction.scaled(lam))
    step = ResolventStep(
        x, y, lam, "lower_grad", _f(f, x), _f(f, y), f, abs_gradient=info.absolute_gradient,
        method="grad_exp",
    )
    step.certificate["contraction"] = lam * info.absolute_gradient - distance(x, y)
    return step


# ---------------------------------------------------------------------------
# certificates


def check_estimate_upper(step: ResolventStep, y: Point, f_y: float | None = None) -> float:
    """d(y,x)^2 - 2 lam [f(J) - f(y)] - d(y,J)^2; nonnegative for y in G.

    ``f_y`` may pass a precomputed f(y).
    """
    if step.mode != "upper_prox":
        raise InvalidArgument("step is not an upper-bound proximal step")
    f = step.functional
    x, J, lam = step.input, step.output, step.lam
    fy = _f(f, y) if f_y is None else f_y
    return distance(y, x) ** 2 - 2 * lam * (step.f_value_out - fy) - distance(y, J) ** 2


def check_estimate_lower(step: ResolventStep, y: Point, K: float) -> float:
    """d(y,x)^2 - 2 lam [f(x) - f(y)] + K/2 (lam |grad_- f|(x))^2 - d(y,J)^2."""
    if step.mode != "lower_grad":
        raise InvalidArgument("step is not a lower-bound gradient step")
    if K < 0:
        raise InvalidArgument("K must be nonnegative")
    f = step.functional
    x, J, lam = step.input, step.output, step.lam
    if lam == 0.0:
        return 0.0
    return (
        distance(y, x) ** 2
        - 2 * lam * (step.f_value_in - _f(f, y))
        + 0.5 * K * (lam * step.abs_gradient) ** 2
        - distance(y, J) ** 2
    )


def optimality_residual(step: ResolventStep, directions) -> float:
    """min over unit directions w of D f(w) - <log_J x, w>/lam at the prox output.

    Nonnegative (up to solver accuracy) when J is the proximal point.
    Directions pointing out of the region are skipped when J is on its boundary.
    """
    J, x, lam = step.output, step.input, step.lam
    f = step.functional
    to_x = log_map(J, x)
    worst = math.inf
    for w in directions:
        v = w if isinstance(w, TangentVector) else TangentVector(J, w, 1.0)
        worst = min(worst, directional_derivative(f, v) - inner_product(to_x, v) / lam)
    return worst
