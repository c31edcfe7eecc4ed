"""Minimum enclosing Euclidean ball of a finite point set.

Welzl's move-to-front recursion with exact circumsphere solves (the method
of choice up to a dozen dimensions); a Frank-Wolfe-style fallback covers
higher dimensions.
"""

from __future__ import annotations

import numpy as np

Array = np.ndarray

_WELZL_DIM_CAP = 13


def _ball_from_boundary(points: list[Array], dim: int):
    """Smallest ball with the given (affinely independent) boundary set."""
    if not points:
        return np.zeros(dim), 0.0
    p0 = points[0]
    if len(points) == 1:
        return p0.copy(), 0.0
    D = np.stack([p - p0 for p in points[1:]])
    rhs = 0.5 * np.einsum("ij,ij->i", D, D)
    # center = p0 + D^T alpha restricted to the affine hull
    M = D @ D.T
    alpha, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    center = p0 + D.T @ alpha
    return center, float(np.linalg.norm(center - p0))


def _welzl(points: list[Array], boundary: list[Array], dim: int):
    if not points or len(boundary) == dim + 1:
        return _ball_from_boundary(boundary, dim)
    p = points[-1]
    center, radius = _welzl(points[:-1], boundary, dim)
    if np.linalg.norm(p - center) <= radius * (1.0 + 1e-12) + 1e-15:
        return center, radius
    return _welzl(points[:-1], boundary + [p], dim)


def _subgradient_meb(pts: Array, iters: int = 20_000):
    c = pts.mean(axis=0)
    for k in range(iters):
        d = pts - c
        far = int(np.argmax(np.einsum("ij,ij->i", d, d)))
        c = c + (pts[far] - c) / (k + 2.0)
    return c, float(np.max(np.linalg.norm(pts - c, axis=1)))


def minimum_enclosing_ball(points: Array, seed: int = 0):
    """Center and radius of the smallest ball containing all rows."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, dim = pts.shape
    if n == 1:
        return pts[0].copy(), 0.0
    if dim > _WELZL_DIM_CAP:
        return _subgradient_meb(pts)
    order = list(range(n))
    np.random.default_rng(seed).shuffle(order)
    shuffled = [pts[i] for i in order]
    center, radius = _welzl(shuffled, [], dim)
    # guard against degenerate recursion results
    true_radius = float(np.max(np.linalg.norm(pts - center, axis=1)))
    return center, max(radius, true_radius)
