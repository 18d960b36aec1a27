"""Seeded low-discrepancy sampling of points in a geodesic ball."""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc

from .spaces import GeodesicBall, _dist, _exp, _geodesic, _normalize, _tangent_basis, spider_leg_interval


def _sobol(d: int, n: int, seed: int) -> np.ndarray:
    sampler = qmc.Sobol(d, scramble=True, seed=seed)
    m = int(np.ceil(np.log2(max(n, 2))))
    return sampler.random_base2(m)[:n]


def sample_region(G: GeodesicBall, n: int, seed: int = 0, boundary_fraction: float = 0.0):
    """Coordinates of ``n`` points of G, shape (n, D).

    Manifold balls are filled through normal coordinates at the center; a
    ``boundary_fraction`` of the points is pushed onto the boundary sphere,
    where convexity constants and comparison inequalities are tightest.
    Spider balls pick a leg and a distance along it.
    """
    space = G.space
    rng = np.random.default_rng(seed)
    if space.kind == "spider":
        u = _sobol(2, n, seed)
        pts = []
        legs = [(leg, spider_leg_interval(G, leg)) for leg in range(space.dim)]
        legs = [(leg, iv) for leg, iv in legs if iv is not None]
        for a, b in u:
            leg, (lo, hi) = legs[min(int(a * len(legs)), len(legs) - 1)]
            if rng.random() < boundary_fraction:
                b = 1.0
            pts.append((leg, lo + b * (hi - lo)))
        return _normalize(space, np.array(pts, dtype=float))
    dim = space.dim
    u = _sobol(dim + 1, n, seed)
    # uniform directions: normalized Gaussians from inverse-CDF transformed coordinates
    z = ndtri(np.clip(u[:, :dim], 1e-12, 1 - 1e-12)) if dim > 1 else np.where(u[:, :1] < 0.5, -1.0, 1.0)
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    radius = G.radius * u[:, dim] ** (1.0 / dim)
    on_boundary = rng.random(n) < boundary_fraction
    radius = np.where(on_boundary, G.radius, radius)
    basis = _tangent_basis(space, G.center.coords)
    V = (z * radius[:, None]) @ basis
    return _exp(space, np.broadcast_to(G.center.coords, V.shape), V)


def sample_unit_tangents(space, x_coords, n: int, seed: int = 0) -> np.ndarray:
    """Unit ambient tangent vectors at a manifold point, shape (n, D)."""
    rng = np.random.default_rng(seed)
    basis = _tangent_basis(space, x_coords)
    z = rng.standard_normal((n, basis.shape[0]))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z @ basis


def sample_local_partners(G: GeodesicBall, X: np.ndarray, scale: float, seed: int) -> np.ndarray:
    """Points near each row of X (inside G), for probing second-order defects."""
    space = G.space
    rng = np.random.default_rng(seed)
    if space.kind == "spider":
        Y = X.copy()
        for i, (leg, r) in enumerate(X):
            iv = spider_leg_interval(G, int(leg))
            Y[i, 1] = min(max(r + rng.uniform(-scale, scale), iv[0]), iv[1])
        Y[Y[:, 1] == 0.0, 0] = 0.0
        return Y
    Y = np.empty_like(X)
    c = G.center.coords
    for i, x in enumerate(X):
        B = _tangent_basis(space, x)
        z = rng.standard_normal(B.shape[0])
        v = (z / np.linalg.norm(z)) * (scale * rng.uniform(0.2, 1.0)) @ B
        y = _exp(space, x, v)
        d = float(_dist(space, c, y))
        if d > G.radius:
            y = _geodesic(space, c, y, G.radius / d)
        Y[i] = y
    return Y
