"""Seminorms of the form x -> pi(B x) with pi an L2, Lp, or ellitopic-dual norm.

The ellitopic-dual variant evaluates the norm whose *conjugate* has a given
ellitope as unit ball, i.e. pi(y) = max { u . y : u in dual_ball }.  Each
seminorm also exposes the machinery needed by projection and distance
oracles: a projector onto the conjugate-norm unit ball, and exact projectors
onto seminorm balls {x : pi(B(x - c)) <= r}.
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionMismatch, DomainViolation, NonConvergence
from ..solvers import bisect_decreasing, fista
from .sets import Ellitope, _QuadPiece

Array = np.ndarray


def _project_lq_ball(v: Array, q: float) -> Array:
    """Euclidean projection onto {u : ||u||_q <= 1}, q in (1, inf)."""
    if q == np.inf:
        return np.clip(v, -1.0, 1.0)
    a = np.abs(v)
    if float(np.sum(a ** q)) <= 1.0:
        return v.copy()
    if abs(q - 2.0) < 1e-14:
        return v / float(np.linalg.norm(v))
    sign = np.sign(v)

    def w_of(lam: float) -> Array:
        # per-coordinate root of w + lam*q*w^(q-1) = a, w in [0, a]
        lo = np.zeros_like(a)
        hi = a.copy()
        for _ in range(70):
            mid = 0.5 * (lo + hi)
            val = mid + lam * q * mid ** (q - 1.0) - a
            hi = np.where(val >= 0.0, mid, hi)
            lo = np.where(val < 0.0, mid, lo)
        return 0.5 * (lo + hi)

    def h(lam: float) -> float:
        w = w_of(lam)
        return float(np.sum(w ** q)) - 1.0

    lam_hi = 1.0
    while h(lam_hi) > 0.0:
        lam_hi *= 4.0
        if lam_hi > 1e100:
            raise NonConvergence("Lq ball projection bracket failed")
    lam = bisect_decreasing(h, 0.0, lam_hi, tol=lam_hi * 1e-13, max_iter=120)
    return sign * w_of(lam)


class Seminorm:
    """Seminorm ||x|| = pi(B x); may vanish on the kernel of B."""

    L2 = "l2"
    LP = "lp"
    ELLITOPIC_DUAL = "ellitopic_dual"

    def __init__(self, matrix: Array, kind: str, p: float | None = None,
                 dual_ball: Ellitope | None = None):
        B = np.atleast_2d(np.asarray(matrix, dtype=float))
        self.matrix = B
        self.kind = kind
        self.q_dim, self.dim = B.shape
        self._op_norm = float(np.linalg.norm(B, 2)) if B.size else 0.0
        self._pinv = None
        if kind == self.L2:
            self.p = 2.0
        elif kind == self.LP:
            if p is None or p < 1:
                raise DomainViolation("Lp seminorm needs p >= 1")
            self.p = float(p)
        elif kind == self.ELLITOPIC_DUAL:
            if dual_ball is None:
                raise DomainViolation("ellitopic-dual seminorm needs its dual ball")
            if dual_ball.dim != self.q_dim:
                raise DimensionMismatch("dual ball must live in the image space")
            self.dual_ball = dual_ball
        else:
            raise DomainViolation(f"unknown seminorm kind {kind!r}")

    # -- constructors --------------------------------------------------------
    @classmethod
    def l2(cls, matrix: Array) -> "Seminorm":
        return cls(matrix, cls.L2)

    @classmethod
    def euclidean(cls, dim: int) -> "Seminorm":
        return cls(np.eye(dim), cls.L2)

    @classmethod
    def lp(cls, matrix: Array, p: float) -> "Seminorm":
        return cls(matrix, cls.LP, p=p)

    @classmethod
    def ellitopic_dual(cls, matrix: Array, dual_ball: Ellitope) -> "Seminorm":
        return cls(matrix, cls.ELLITOPIC_DUAL, dual_ball=dual_ball)

    @property
    def is_euclidean(self) -> bool:
        return self.kind == self.L2 or (self.kind == self.LP and self.p == 2.0)

    # -- evaluation ----------------------------------------------------------
    def pi_eval(self, y: Array) -> float:
        """The norm pi on the image space."""
        y = np.asarray(y, dtype=float)
        if self.kind == self.L2:
            return float(np.linalg.norm(y))
        if self.kind == self.LP:
            if self.p == 1.0:
                return float(np.sum(np.abs(y)))
            return float(np.sum(np.abs(y) ** self.p) ** (1.0 / self.p))
        _, val = self.dual_ball.support(y, tol=1e-10)
        return val

    def eval(self, x: Array) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatch(
                f"seminorm expects dim {self.dim}, got shape {x.shape}")
        return self.pi_eval(self.matrix @ x)

    # -- conjugate-norm unit ball (used for smoothing and dual searches) -----
    def dual_project(self, u: Array) -> Array:
        """Projection onto the unit ball of the conjugate norm pi*."""
        u = np.asarray(u, dtype=float)
        if self.kind == self.L2:
            n = float(np.linalg.norm(u))
            return u if n <= 1.0 else u / n
        if self.kind == self.LP:
            if self.p == 1.0:
                return np.clip(u, -1.0, 1.0)
            q = self.p / (self.p - 1.0)
            return _project_lq_ball(u, q)
        return self.dual_ball.project(u, tol=1e-10)

    def dual_radius(self) -> float:
        """Bound on the Euclidean norm over the conjugate unit ball."""
        if self.kind == self.L2:
            return 1.0
        if self.kind == self.LP:
            if self.p == 1.0:
                return float(np.sqrt(self.q_dim))
            q = self.p / (self.p - 1.0)
            if q <= 2.0:
                return 1.0
            return float(self.q_dim ** (0.5 - 1.0 / q))
        return self.dual_ball.outer_radius()

    def op_norm(self) -> float:
        return self._op_norm

    # -- seminorm-ball projection pieces --------------------------------------
    def _kernel_projector(self, center: Array):
        if self._pinv is None:
            self._pinv = np.linalg.pinv(self.matrix)
        P = self._pinv @ self.matrix

        def proj(pt: Array) -> Array:
            return pt - P @ (pt - center)

        return proj

    def ball_projector(self, center: Array, radius: float):
        """Exact Euclidean projector onto {x : pi(B(x - center)) <= radius}."""
        center = np.asarray(center, dtype=float)
        if radius == 0.0:
            return self._kernel_projector(center)
        if self.kind == self.L2:
            piece = _QuadPiece(self.matrix.T @ self.matrix, center,
                               radius * radius)
            return piece.project
        B = self.matrix
        BBt = B @ B.T
        L_bbt = float(np.linalg.norm(BBt, 2)) + 1e-300

        def proj(pt: Array) -> Array:
            z0 = B @ (pt - center)
            if self.pi_eval(z0) <= radius:
                return pt

            def x_of(lam: float) -> Array:
                # inner concave quadratic over the conjugate unit ball
                def fun(u):
                    return -(float(u @ z0) - 0.5 * lam * float(u @ (BBt @ u)))

                def grad(u):
                    return -(z0 - lam * (BBt @ u))

                u0 = self.dual_project(z0 / max(np.linalg.norm(z0), 1e-300))
                u, _ = fista(grad, self.dual_project, u0,
                             lipschitz=lam * L_bbt + 1e-12, fun=fun,
                             tol=1e-14, max_iter=3000)
                return pt - lam * (B.T @ u)

            def h(lam: float) -> float:
                x = x_of(lam)
                return self.pi_eval(B @ (x - center)) - radius

            lam_hi = 1.0
            while h(lam_hi) > 0.0:
                lam_hi *= 4.0
                if lam_hi > 1e14:
                    raise NonConvergence("seminorm ball projection bracket failed")
            lam = bisect_decreasing(h, 0.0, lam_hi, tol=lam_hi * 1e-11,
                                    max_iter=70)
            return x_of(lam)

        return proj


def seminorm_eval(s: Seminorm, x: Array) -> float:
    """Value of the seminorm at ``x``."""
    return s.eval(x)
