"""Minimum seminorm distance between convex compact sets.

The smooth (L2-type) case runs accelerated projected gradient on the squared
objective; other norms are handled by Nesterov smoothing with a decreasing
smoothing parameter, which needs only the conjugate-ball projector supplied
by the seminorm.  Empty sets short-circuit to the +inf sentinel.
"""

from __future__ import annotations

import math

import numpy as np

from ..solvers import fista
from .seminorms import Seminorm
from .sets import Ball, ConvexCompactSet

Array = np.ndarray


def _fista_pair_smooth(set_a, set_b, G, x0, y0, tol, max_iter):
    """Minimize 0.5 * (x-y)^T G (x-y) over set_a x set_b."""
    n = x0.shape[0]
    L = 2.0 * float(np.linalg.norm(G, 2)) + 1e-300

    def fun(z):
        d = z[:n] - z[n:]
        return 0.5 * float(d @ (G @ d))

    def grad(z):
        d = G @ (z[:n] - z[n:])
        return np.concatenate([d, -d])

    def project(z):
        return np.concatenate([set_a.project(z[:n], tol=min(tol, 1e-9)),
                               set_b.project(z[n:], tol=min(tol, 1e-9))])

    z0 = np.concatenate([x0, y0])
    z, f = fista(grad, project, z0, L, fun, tol=tol * tol * 0.01,
                 max_iter=max_iter)
    return z[:n], z[n:], f


def _alternate_polish(set_a, set_b, x, y, tol, rounds=300):
    """Alternating projections polish for the plain Euclidean metric."""
    for _ in range(rounds):
        x_new = set_a.project(y, tol=min(tol, 1e-9))
        y_new = set_b.project(x_new, tol=min(tol, 1e-9))
        move = max(float(np.max(np.abs(x_new - x))), float(np.max(np.abs(y_new - y))))
        x, y = x_new, y_new
        if move <= 0.1 * tol:
            break
    return x, y


def min_seminorm_distance(set_a: ConvexCompactSet, set_b: ConvexCompactSet,
                          s: Seminorm, tol: float = 1e-7,
                          max_iter: int = 20_000):
    """min ||x - y|| over x in set_a, y in set_b, in the seminorm ``s``.

    Returns ``(value, arg_a, arg_b)``; ``(inf, None, None)`` when either set
    is flagged empty.
    """
    if set_a.is_empty() or set_b.is_empty():
        return math.inf, None, None
    x0 = set_a.anchor_point()
    y0 = set_b.anchor_point()
    B = s.matrix

    if s.kind == Seminorm.L2:
        G = B.T @ B
        x, y, f = _fista_pair_smooth(set_a, set_b, G, x0, y0, tol, max_iter)
        if B.shape == (set_a.dim, set_a.dim) and np.allclose(B, np.eye(set_a.dim)):
            x, y = _alternate_polish(set_a, set_b, x, y, tol)
        return s.eval(x - y), x, y

    # nonsmooth pi: smoothing continuation on f_mu = max_u u.B(x-y) - mu/2|u|^2
    Ru = s.dual_radius()
    L_B = s.op_norm()
    n = set_a.dim
    z = np.concatenate([x0, y0])
    mu = max(s.eval(x0 - y0), tol, 1.0)
    mu_final = tol / (Ru * Ru + 1.0)

    def project(zz):
        return np.concatenate([set_a.project(zz[:n], tol=min(tol, 1e-9)),
                               set_b.project(zz[n:], tol=min(tol, 1e-9))])

    while True:
        def fun(zz, mu=mu):
            d = B @ (zz[:n] - zz[n:])
            u = s.dual_project(d / mu)
            return float(u @ d) - 0.5 * mu * float(u @ u)

        def grad(zz, mu=mu):
            d = B @ (zz[:n] - zz[n:])
            u = s.dual_project(d / mu)
            g = B.T @ u
            return np.concatenate([g, -g])

        L = L_B * L_B / mu + 1e-300
        z, _ = fista(grad, project, z, L, fun, tol=0.05 * tol,
                     max_iter=max_iter // 8)
        if mu <= mu_final:
            break
        mu = max(mu * 0.15, mu_final)

    x, y = z[:n], z[n:]
    return s.eval(x - y), x, y


def seminorm_distance_to_point(set_: ConvexCompactSet, s: Seminorm,
                               point: Array, tol: float = 1e-7):
    """min ||x - point|| over x in set_, in the seminorm ``s``."""
    value, x, _ = min_seminorm_distance(set_, Ball(point, 0.0), s, tol=tol)
    return value, x
