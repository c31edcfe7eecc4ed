"""Batched Gaussian pair solver for ball-with-halfspace hypothesis sides.

The adaptive and aggregation routines solve thousands of structurally
identical pairwise problems per observation batch (one per quadruple or per
piece pair).  When the scheme is Gaussian, every signal set is a Euclidean
ball and the cuts are single halfspaces, the affinity maximization reduces
to a batched quadratic minimization with closed-form piece projections, and
the detector risks are certified by batched 1-D dual supports.  Rows are
independent; all arrays share the leading batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

Array = np.ndarray


@dataclass
class BallRows:
    """Batch of sets ball(center, radius) intersected with {n . x <= b}."""

    center: Array          # (Q, n)
    radius: Array          # (Q,)
    normal: Array          # (Q, n); ignored where has_cut is False
    offset: Array          # (Q,)
    has_cut: Array         # (Q,) bool

    @classmethod
    def balls_only(cls, center: Array, radius: Array) -> "BallRows":
        q, n = center.shape
        return cls(center, radius, np.zeros((q, n)), np.zeros(q),
                   np.zeros(q, dtype=bool))

    def empty_mask(self, tol: float = 1e-12) -> Array:
        """Rows whose ball-halfspace intersection is empty (closed form)."""
        nn = np.linalg.norm(self.normal, axis=1)
        lo = np.einsum("qn,qn->q", self.normal, self.center) - self.radius * nn
        out = self.has_cut & (lo - self.offset > tol * (1.0 + np.abs(self.offset)))
        return out

    def project(self, pts: Array, sweeps: int = 0, tol: float = 0.0) -> Array:
        """Exact batched projection onto ball-with-halfspace rows.

        KKT case split: the ball projection when it satisfies the cut; the
        halfspace projection when it stays in the ball; otherwise the nearest
        point of the sphere-hyperplane circle.  (sweeps/tol kept for
        signature compatibility; the projection is closed form.)
        """
        c, r, n, b = self.center, self.radius, self.normal, self.offset
        nn2 = np.einsum("qn,qn->q", n, n) + 1e-300
        d = pts - c
        nd = np.linalg.norm(d, axis=1)
        scale = np.where(nd > r, r / (nd + 1e-300), 1.0)
        qb = c + scale[:, None] * d
        side = np.einsum("qn,qn->q", n, qb) - b
        ok_ball = ~self.has_cut | (side <= 1e-14 * (1.0 + np.abs(b)))

        viol = np.maximum(np.einsum("qn,qn->q", n, pts) - b, 0.0)
        qh = pts - (viol / nn2)[:, None] * n
        ok_half = np.linalg.norm(qh - c, axis=1) <= r * (1.0 + 1e-14)

        # both constraints active: closest point on the circle
        off = (b - np.einsum("qn,qn->q", n, c)) / nn2
        o = c + off[:, None] * n
        rho = np.sqrt(np.maximum(r * r - off * off * nn2, 0.0))
        w = pts - o
        w_perp = w - (np.einsum("qn,qn->q", n, w) / nn2)[:, None] * n
        nw = np.linalg.norm(w_perp, axis=1)
        deg = nw <= 1e-300
        if np.any(deg):
            # deterministic orthogonal fallback for on-axis points
            e = np.zeros_like(n)
            e[np.arange(len(n)), np.argmin(np.abs(n), axis=1)] = 1.0
            alt = e - (np.einsum("qn,qn->q", n, e) / nn2)[:, None] * n
            w_perp = np.where(deg[:, None], alt, w_perp)
            nw = np.linalg.norm(w_perp, axis=1)
        qc = o + (rho / (nw + 1e-300))[:, None] * w_perp

        out = np.where(ok_ball[:, None], qb,
                       np.where(ok_half[:, None], qh, qc))
        return out

    def support(self, v: Array, iters: int = 60) -> Array:
        """Certified upper bound on sup v . x per row (1-D Lagrangian dual).

        q(lam) = (v - lam n) . c + r ||v - lam n|| + lam b is convex in lam
        and upper-bounds the support for every lam >= 0, so bisection slack
        never invalidates the certificate.
        """
        def qval(lam: Array) -> Array:
            w = v - lam[:, None] * self.normal
            return (np.einsum("qn,qn->q", w, self.center)
                    + self.radius * np.linalg.norm(w, axis=1)
                    + lam * self.offset)

        def deriv(lam: Array) -> Array:
            w = v - lam[:, None] * self.normal
            nw = np.linalg.norm(w, axis=1) + 1e-300
            return (self.offset
                    - np.einsum("qn,qn->q", self.normal, self.center)
                    - self.radius * np.einsum("qn,qn->q", self.normal, w) / nw)

        q0 = qval(np.zeros(len(self.radius)))
        active = self.has_cut & (deriv(np.zeros(len(self.radius))) < 0.0)
        if not np.any(active):
            return q0
        hi = np.ones(len(self.radius))
        for _ in range(80):
            grow = active & (deriv(hi) < 0.0)
            if not np.any(grow):
                break
            hi = np.where(grow, 2.0 * hi, hi)
        lo = np.zeros_like(hi)
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            neg = deriv(mid) < 0.0
            lo = np.where(neg, mid, lo)
            hi = np.where(neg, hi, mid)
        lam = hi
        return np.where(active, np.minimum(qval(lam), q0), q0)


@dataclass
class GaussianPairBatch:
    """Stacked two-sided Gaussian problems: minimize ||A1 x - A2 y||^2 / 8."""

    A1: Array  # (Q, m, n)
    A2: Array
    side1: BallRows
    side2: BallRows

    def __post_init__(self):
        self.G1 = np.einsum("qmi,qmj->qij", self.A1, self.A1)
        self.G2 = np.einsum("qmi,qmj->qij", self.A2, self.A2)
        self.G12 = np.einsum("qmi,qmj->qij", self.A1, self.A2)
        self._lip = self._estimate_lipschitz()

    def _estimate_lipschitz(self) -> Array:
        qn = self.G1.shape[0]
        n = self.G1.shape[1]
        v = np.ones((qn, 2 * n))
        for _ in range(30):
            vx, vy = v[:, :n], v[:, n:]
            wx = (np.einsum("qij,qj->qi", self.G1, vx)
                  - np.einsum("qij,qj->qi", self.G12, vy))
            wy = (np.einsum("qij,qj->qi", self.G2, vy)
                  - np.einsum("qji,qj->qi", self.G12, vx))
            w = np.concatenate([wx, wy], axis=1)
            nv = np.linalg.norm(w, axis=1, keepdims=True) + 1e-300
            v = w / nv
        vx, vy = v[:, :n], v[:, n:]
        wx = (np.einsum("qij,qj->qi", self.G1, vx)
              - np.einsum("qij,qj->qi", self.G12, vy))
        wy = (np.einsum("qij,qj->qi", self.G2, vy)
              - np.einsum("qji,qj->qi", self.G12, vx))
        ray = np.einsum("qi,qi->q", v, np.concatenate([wx, wy], axis=1))
        return np.maximum(np.abs(ray), 1e-12) * 1.5

    def _objective(self, x: Array, y: Array) -> Array:
        return (0.125 * (np.einsum("qi,qij,qj->q", x, self.G1, x)
                         - 2.0 * np.einsum("qi,qij,qj->q", x, self.G12, y)
                         + np.einsum("qi,qij,qj->q", y, self.G2, y)))

    def solve(self, iters: int = 400, rel_tol: float = 1e-9) -> dict:
        """Batched accelerated projected gradient; returns certified risks.

        eps is the moment-generating-function certificate for the detector
        induced by the solved pair, valid for the exact sets even when the
        minimization is approximate.
        """
        x = self.side1.project(self.side1.center.copy())
        y = self.side2.project(self.side2.center.copy())
        tx, ty = x.copy(), y.copy()
        t_acc = 1.0
        step = (0.25 / self._lip)[:, None]
        f_prev = self._objective(x, y)
        for it in range(iters):
            gx = 0.25 * (np.einsum("qij,qj->qi", self.G1, tx)
                         - np.einsum("qij,qj->qi", self.G12, ty))
            gy = 0.25 * (np.einsum("qij,qj->qi", self.G2, ty)
                         - np.einsum("qji,qj->qi", self.G12, tx))
            x_new = self.side1.project(tx - step * gx)
            y_new = self.side2.project(ty - step * gy)
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_acc * t_acc))
            beta = (t_acc - 1.0) / t_new
            tx = x_new + beta * (x_new - x)
            ty = y_new + beta * (y_new - y)
            x, y, t_acc = x_new, y_new, t_new
            if it % 20 == 19:  # reset momentum, check stagnation
                tx, ty, t_acc = x.copy(), y.copy(), 1.0
                f_now = self._objective(x, y)
                if np.max(f_prev - f_now) <= rel_tol * (1.0 + np.max(np.abs(f_now))):
                    break
                f_prev = f_now
        mu = np.einsum("qmn,qn->qm", self.A1, x)
        nu = np.einsum("qmn,qn->qm", self.A2, y)
        w = 0.5 * (mu - nu)
        const = 0.25 * (np.einsum("qm,qm->q", nu, nu)
                        - np.einsum("qm,qm->q", mu, mu))
        w_sq = 0.5 * np.einsum("qm,qm->q", w, w)
        v1 = -np.einsum("qmn,qm->qn", self.A1, w)
        v2 = np.einsum("qmn,qm->qn", self.A2, w)
        log_e1 = self.side1.support(v1) - const + w_sq
        log_e2 = self.side2.support(v2) + const + w_sq
        eps = np.exp(np.minimum(np.maximum(log_e1, log_e2), 0.0))
        return {"x": x, "y": y, "mu": mu, "nu": nu, "weights": w,
                "const": const, "eps": eps}


def detector_statistics(weights: Array, const: Array, obs: Array) -> Array:
    """Summed statistics of the batched detectors on one K-row block."""
    s = obs.sum(axis=0)
    return weights @ s + const * obs.shape[0]
