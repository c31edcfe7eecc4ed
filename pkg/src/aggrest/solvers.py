"""First-order building blocks: Dykstra, FISTA, monotone ascent, bisection.

Everything here is deliberately dependency-free (plain numpy + callables) so
the geometry, detector and bound modules can share one set of solvers.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import NonConvergence

Array = np.ndarray


def dykstra(projectors: Sequence[Callable[[Array], Array]], point: Array,
            tol: float = 1e-8, max_iter: int = 10_000) -> Array:
    """Project ``point`` onto the intersection of convex sets.

    ``projectors`` are exact Euclidean projectors onto the individual sets.
    Terminates when the successive-iterate gap over a full sweep drops below
    ``tol``; raises :class:`NonConvergence` at the iteration cap, which for
    nonempty intersections signals ill-conditioned set data.
    """
    if len(projectors) == 1:
        return projectors[0](point)
    x = np.asarray(point, dtype=float).copy()
    increments = [np.zeros_like(x) for _ in projectors]
    for _ in range(max_iter):
        gap = 0.0
        for k, proj in enumerate(projectors):
            w = x + increments[k]
            x_new = proj(w)
            increments[k] = w - x_new
            gap = max(gap, float(np.max(np.abs(x_new - x))) if x.size else 0.0)
            x = x_new
        if gap <= tol:
            return x
    raise NonConvergence(
        f"Dykstra did not reach tol={tol} within {max_iter} sweeps")


def fista(grad: Callable[[Array], Array], project: Callable[[Array], Array],
          x0: Array, lipschitz: float, fun: Callable[[Array], float],
          tol: float = 1e-10, max_iter: int = 20_000,
          restart: bool = True) -> tuple[Array, float]:
    """Minimize a smooth convex function over a convex set.

    Accelerated projected gradient with function-value restart.  Returns the
    best iterate and its objective value.  ``tol`` is an absolute threshold
    on the objective decrease over a 20-iteration window.
    """
    step = 1.0 / max(lipschitz, 1e-300)
    x = np.asarray(x0, dtype=float).copy()
    y = x.copy()
    t = 1.0
    f_best = fun(x)
    x_best = x.copy()
    window_best = f_best
    for it in range(max_iter):
        x_new = project(y - step * grad(y))
        f_new = fun(x_new)
        if restart and f_new > f_best:
            # momentum overshoot: restart from the best point
            y = x_best.copy()
            t = 1.0
            x = x_best.copy()
            continue
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t = x_new, t_new
        if f_new < f_best:
            f_best, x_best = f_new, x_new.copy()
        if (it + 1) % 20 == 0:
            if window_best - f_best <= tol:
                break
            window_best = f_best
    return x_best, f_best


def ascend_monotone(value_grad: Callable[[Array], tuple[float, Array]],
                    project: Callable[[Array], Array], x0: Array,
                    step0: float = 1.0, tol: float = 1e-9,
                    max_iter: int = 50_000,
                    sufficient: float = 1e-4) -> tuple[Array, float, list[float]]:
    """Maximize a concave function by projected gradient ascent with Armijo
    backtracking.  The recorded objective trace is nondecreasing.

    Returns (maximizer, value, trace).  Terminates once an accepted step
    improves the objective by less than ``tol`` (with the step already shrunk),
    or when the projected step collapses.
    """
    x = project(np.asarray(x0, dtype=float))
    f, g = value_grad(x)
    trace = [f]
    step = step0
    for _ in range(max_iter):
        accepted = False
        while step > 1e-18:
            x_new = project(x + step * g)
            delta = x_new - x
            dn = float(np.dot(delta, delta))
            if dn == 0.0:
                return x, f, trace
            f_new, g_new = value_grad(x_new)
            if f_new >= f + sufficient * float(np.dot(g, delta)) and f_new >= f:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            return x, f, trace
        improvement = f_new - f
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        step *= 2.0
        if improvement < tol and step < step0:
            return x, f, trace
        if improvement < tol and len(trace) > 3 and trace[-1] - trace[-3] < 2 * tol:
            return x, f, trace
    raise NonConvergence(f"projected ascent exceeded {max_iter} iterations")


def max_linear(project: Callable[[Array], Array], v: Array, x0: Array,
               radius_bound: float, tol: float = 1e-9) -> tuple[Array, float]:
    """Maximize ``v . x`` over a convex compact set given its projector.

    Repeated proximal steps: the projection z of ``x + t v`` maximizes
    ``v.z - ||z - x||^2 / (2 t)``, so for feasible x the true maximum is at
    most ``v.z + D^2 / (2 t)`` with D the set diameter.  The returned value
    is that certified upper bound (>= the value at the returned point); the
    step is kept moderate so the projection stays well-conditioned.
    """
    nv = float(np.linalg.norm(v))
    x = project(np.asarray(x0, dtype=float))
    if nv == 0.0:
        return x, 0.0
    d = 2.0 * radius_bound + 1.0
    t = d / nv
    for _ in range(3):
        x = project(x + t * v)
        t *= 16.0
    # proximal-point refinement: after k steps at step size t the maximum
    # exceeds the iterate value by at most d^2 / (2 t k); a near-fixed point
    # with displacement delta certifies the tighter slack d * delta / t
    t_final = 2048.0 * d / nv
    k = 32
    done = 0
    delta = math.inf
    for _ in range(k):
        x_new = project(x + t_final * v)
        delta = float(np.linalg.norm(x_new - x))
        x = x_new
        done += 1
        if delta <= 1e-7 * d:
            break
    slack = min(d * d / (2.0 * t_final * max(done, 1)), d * delta / t_final)
    return x, float(np.dot(v, x)) + slack


def bisect_decreasing(h: Callable[[float], float], lo: float, hi: float,
                      tol: float, max_iter: int = 200) -> float:
    """Root of a nonincreasing function: smallest t with h(t) <= 0.

    Assumes h(lo) >= 0 >= h(hi); returns a point within ``tol`` of the
    crossing (biased to the feasible side).
    """
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if h(mid) <= 0.0:
            hi = mid
        else:
            lo = mid
    return hi
