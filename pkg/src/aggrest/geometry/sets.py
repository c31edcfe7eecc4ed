"""Convex compact signal sets with projection, support and emptiness oracles.

Six variants are supported: balls, ellipsoids, boxes, ellitopes (intersections
of centered quadratic sublevel sets steered by a monotone parameter set), and
two cut constructions (halfspace cut, seminorm-ball cut) layered on a base
set.  Every variant is bounded, immutable after construction, and exposes

* ``project``   -- Euclidean projection (closed form or Dykstra over pieces),
* ``support``   -- maximizer and value of a linear functional,
* ``contains``  -- membership within a scale-aware tolerance,
* ``is_empty``  -- cut variants can be empty; emptiness is a queryable state,
* ``outer_radius`` -- finite bound on the Euclidean norm over the set.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from ..errors import DimensionMismatch, DomainViolation, NonConvergence
from ..solvers import bisect_decreasing, dykstra, max_linear

Array = np.ndarray

_DYKSTRA_CAP = 10_000


def _freeze(a: Array) -> Array:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def _check_dim(x: Array, dim: int) -> Array:
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise DimensionMismatch(f"expected vector of dim {dim}, got shape {x.shape}")
    return x


# ---------------------------------------------------------------------------
# monotone parameter sets steering ellitopes


class MonotoneParamSet:
    """Coordinatewise-downward-closed compact subset of the nonneg orthant."""

    dim: int

    def support(self, lam: Array) -> float:
        """max of lam . t over the set, for lam >= 0."""
        raise NotImplementedError

    def sum_cap(self) -> float:
        """max of sum(t) over the set."""
        raise NotImplementedError


class UnitBox(MonotoneParamSet):
    """The unit box [0, 1]^L."""

    def __init__(self, dim: int):
        if dim < 1:
            raise DomainViolation("UnitBox needs dim >= 1")
        self.dim = int(dim)

    def support(self, lam: Array) -> float:
        return float(np.sum(np.maximum(lam, 0.0)))

    def sum_cap(self) -> float:
        return float(self.dim)

    def __repr__(self):
        return f"UnitBox({self.dim})"


class PNormCap(MonotoneParamSet):
    """{t >= 0 : sum_k t_k^(p/2) <= 1} for p >= 2."""

    def __init__(self, dim: int, p: float):
        if dim < 1 or p < 2:
            raise DomainViolation("PNormCap needs dim >= 1 and p >= 2")
        self.dim = int(dim)
        self.p = float(p)

    def support(self, lam: Array) -> float:
        lam = np.maximum(np.asarray(lam, dtype=float), 0.0)
        s = self.p / 2.0
        if s <= 1.0 + 1e-12:
            return float(np.max(lam, initial=0.0))
        q = s / (s - 1.0)
        return float(np.sum(lam ** q) ** (1.0 / q))

    def sum_cap(self) -> float:
        return float(self.dim ** (1.0 - 2.0 / self.p))

    def __repr__(self):
        return f"PNormCap({self.dim}, p={self.p})"


# ---------------------------------------------------------------------------
# projection pieces (exact projectors onto single constraints)


class _QuadPiece:
    """{x : (x - c)^T R (x - c) <= cap} with R symmetric PSD."""

    def __init__(self, R: Array, center: Array, cap: float):
        self.R = R
        self.center = center
        self.cap = float(cap)
        d, V = np.linalg.eigh(0.5 * (R + R.T))
        self._d = np.maximum(d, 0.0)
        self._V = V

    def residual(self, x: Array) -> float:
        z = x - self.center
        return float(z @ self.R @ z) - self.cap

    def project(self, p: Array) -> Array:
        z = self._V.T @ (p - self.center)
        dz2 = self._d * z * z
        q = float(np.sum(dz2))
        if q <= self.cap * (1.0 + 1e-14) + 1e-300:
            return p
        if self.cap <= 0.0:
            # constraint degenerates to the kernel of R
            z = np.where(self._d > 1e-14, 0.0, z)
            return self.center + self._V @ z
        # g(lam) = sum d z^2/(1+lam d)^2 - cap is convex decreasing, so
        # Newton from the left converges monotonically
        lam = 0.0
        g = q - self.cap
        for _ in range(80):
            t = 1.0 + lam * self._d
            g = float(np.sum(dz2 / (t * t))) - self.cap
            if g <= self.cap * 1e-13 + 1e-300:
                break
            dg = -2.0 * float(np.sum(self._d * dz2 / (t * t * t)))
            lam -= g / dg
        return self.center + self._V @ (z / (1.0 + lam * self._d))


class _HalfspacePiece:
    """{x : n . x <= b}."""

    def __init__(self, normal: Array, offset: float):
        self.normal = normal
        self.offset = float(offset)
        self._nn = float(normal @ normal)

    def residual(self, x: Array) -> float:
        return float(self.normal @ x) - self.offset

    def project(self, p: Array) -> Array:
        viol = float(self.normal @ p) - self.offset
        if viol <= 0.0:
            return p
        return p - (viol / self._nn) * self.normal


# ---------------------------------------------------------------------------
# set variants


class ConvexCompactSet:
    """Base class for the supported convex compact set variants."""

    dim: int

    # -- pieces / projection -------------------------------------------------
    def _piece_projectors(self) -> list[Callable[[Array], Array]]:
        raise NotImplementedError

    def project(self, point: Array, tol: float = 1e-8) -> Array:
        """Euclidean projection of ``point`` onto the set, within ``tol``."""
        if tol <= 0:
            raise DomainViolation("tol must be positive")
        p = _check_dim(point, self.dim)
        projs = self._piece_projectors()
        if len(projs) == 1:
            return projs[0](p)
        return dykstra(projs, p, tol=tol, max_iter=_DYKSTRA_CAP)

    # -- membership ----------------------------------------------------------
    def residual(self, x: Array) -> float:
        """Largest constraint violation at ``x`` (<= 0 means feasible)."""
        raise NotImplementedError

    def contains(self, x: Array, tol: float = 1e-8) -> bool:
        x = _check_dim(x, self.dim)
        scale = 1.0 + self.outer_radius()
        return self.residual(x) <= tol * scale

    # -- global queries --------------------------------------------------------
    def outer_radius(self) -> float:
        raise NotImplementedError

    def anchor_point(self) -> Array:
        """Some feasible point (meaningful only when the set is nonempty)."""
        raise NotImplementedError

    #: True when support() is closed-form (enables 1-D duals on cut variants)
    exact_support = False

    def support(self, v: Array, tol: float = 1e-9) -> tuple[Array, float]:
        """Near-maximizer of ``v . x`` over the set and a certified upper
        bound on the maximum (exact for the closed-form variants)."""
        v = _check_dim(v, self.dim)
        return max_linear(lambda p: self.project(p, tol=min(tol, 1e-8)), v,
                          self.anchor_point(), self.outer_radius(), tol=tol)

    def is_empty(self, tol: float = 1e-8) -> bool:
        return False

    def radial_feasible(self, z: Array, steps: int = 40) -> Array:
        """Pull ``z`` toward the anchor until feasible (sets are star-shaped
        about their anchors); much cheaper than a projection."""
        if self.residual(z) <= 0.0:
            return np.asarray(z, dtype=float)
        a = self.anchor_point()
        lo, hi = 0.0, 1.0
        for _ in range(steps):
            t = 0.5 * (lo + hi)
            if self.residual(a + t * (z - a)) <= 0.0:
                lo = t
            else:
                hi = t
        return a + lo * (z - a)

    def sample(self, rng: np.random.Generator, n: int) -> Array:
        """n feasible points: Gaussian draws pulled radially into the set."""
        r = self.outer_radius()
        raw = rng.standard_normal((n, self.dim)) * max(r, 1.0)
        return np.stack([self.radial_feasible(row) for row in raw])


class Ball(ConvexCompactSet):
    """Euclidean ball {x : ||x - center|| <= radius}."""

    exact_support = True

    def __init__(self, center: Array, radius: float):
        self.center = _freeze(np.atleast_1d(center))
        if self.center.ndim != 1:
            raise DimensionMismatch("center must be a vector")
        if radius < 0:
            raise DomainViolation("radius must be nonnegative")
        self.radius = float(radius)
        self.dim = self.center.shape[0]

    def _piece_projectors(self):
        return [self._project]

    def _project(self, p: Array) -> Array:
        d = p - self.center
        nd = float(np.linalg.norm(d))
        if nd <= self.radius:
            return p
        return self.center + (self.radius / nd) * d

    def residual(self, x: Array) -> float:
        return float(np.linalg.norm(x - self.center)) - self.radius

    def outer_radius(self) -> float:
        return float(np.linalg.norm(self.center)) + self.radius

    def anchor_point(self) -> Array:
        return self.center.copy()

    def support(self, v, tol: float = 1e-9):
        v = _check_dim(v, self.dim)
        nv = float(np.linalg.norm(v))
        if nv == 0.0:
            return self.center.copy(), 0.0
        x = self.center + (self.radius / nv) * v
        return x, float(v @ x)

    def __repr__(self):
        return f"Ball(center={self.center.tolist()}, radius={self.radius})"


class Box(ConvexCompactSet):
    """Axis-aligned box {x : lower <= x <= upper}."""

    exact_support = True

    def __init__(self, lower: Array, upper: Array):
        self.lower = _freeze(np.atleast_1d(lower))
        self.upper = _freeze(np.atleast_1d(upper))
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise DimensionMismatch("lower/upper must be vectors of equal length")
        if np.any(self.lower > self.upper):
            raise DomainViolation("box needs lower <= upper")
        self.dim = self.lower.shape[0]

    def _piece_projectors(self):
        return [self._project]

    def _project(self, p: Array) -> Array:
        return np.clip(p, self.lower, self.upper)

    def residual(self, x: Array) -> float:
        return float(np.max(np.maximum(self.lower - x, x - self.upper)))

    def outer_radius(self) -> float:
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))

    def anchor_point(self) -> Array:
        return 0.5 * (self.lower + self.upper)

    def support(self, v, tol: float = 1e-9):
        v = _check_dim(v, self.dim)
        x = np.where(v >= 0, self.upper, self.lower)
        return x, float(v @ x)

    def __repr__(self):
        return f"Box({self.lower.tolist()}, {self.upper.tolist()})"


class Ellipsoid(ConvexCompactSet):
    """{x : (x - center)^T shape (x - center) <= radius^2}, shape sym. PD."""

    exact_support = True

    def __init__(self, shape: Array, center: Array, radius: float):
        S = np.array(shape, dtype=float)
        self.center = _freeze(np.atleast_1d(center))
        self.dim = self.center.shape[0]
        if S.shape != (self.dim, self.dim):
            raise DimensionMismatch("shape matrix size mismatch")
        if not np.allclose(S, S.T, atol=1e-10):
            raise DomainViolation("shape matrix must be symmetric")
        eigs = np.linalg.eigvalsh(0.5 * (S + S.T))
        if eigs[0] <= 0:
            raise DomainViolation("shape matrix must be positive definite")
        if radius < 0:
            raise DomainViolation("radius must be nonnegative")
        self.shape_matrix = _freeze(S)
        self.radius = float(radius)
        self._min_eig = float(eigs[0])
        self._inv = np.linalg.inv(S)
        self._piece = _QuadPiece(S, self.center, radius * radius)

    def _piece_projectors(self):
        return [self._piece.project]

    def residual(self, x: Array) -> float:
        z = x - self.center
        q = float(z @ self.shape_matrix @ z)
        # convert to a length-like residual so tolerances are comparable
        return np.sqrt(max(q, 0.0)) - self.radius

    def outer_radius(self) -> float:
        return float(np.linalg.norm(self.center)) + self.radius / np.sqrt(self._min_eig)

    def anchor_point(self) -> Array:
        return self.center.copy()

    def support(self, v, tol: float = 1e-9):
        v = _check_dim(v, self.dim)
        w = self._inv @ v
        q = float(v @ w)
        if q <= 0.0:
            return self.center.copy(), float(v @ self.center)
        x = self.center + (self.radius / np.sqrt(q)) * w
        return x, float(v @ x)


class Ellitope(ConvexCompactSet):
    """{x : exists t in paramset with x^T R_k x <= t_k for all k}.

    Each R_k is symmetric PSD and sum_k R_k is positive definite, which makes
    the set compact and guarantees 0 is a member.
    """

    def __init__(self, matrices: Sequence[Array], paramset: MonotoneParamSet):
        mats = [np.array(R, dtype=float) for R in matrices]
        if not mats:
            raise DomainViolation("ellitope needs at least one matrix")
        self.dim = mats[0].shape[0]
        for R in mats:
            if R.shape != (self.dim, self.dim):
                raise DimensionMismatch("ellitope matrices must share one size")
            if not np.allclose(R, R.T, atol=1e-10):
                raise DomainViolation("ellitope matrices must be symmetric")
            if np.linalg.eigvalsh(0.5 * (R + R.T))[0] < -1e-10:
                raise DomainViolation("ellitope matrices must be PSD")
        if len(mats) != paramset.dim:
            raise DimensionMismatch("paramset dim must match matrix count")
        total = np.sum(mats, axis=0)
        min_eig = float(np.linalg.eigvalsh(0.5 * (total + total.T))[0])
        if min_eig <= 0:
            raise DomainViolation("sum of ellitope matrices must be positive definite")
        self.matrices = [_freeze(R) for R in mats]
        self._stack = np.stack(mats)
        self.paramset = paramset
        self._sum_min_eig = min_eig
        if isinstance(paramset, UnitBox):
            self._quads = [_QuadPiece(R, np.zeros(self.dim), 1.0) for R in mats]
        else:
            self._quads = None

    # membership function g with the minimal parameter choice t_k = x^T R_k x
    def _levels(self, x: Array) -> Array:
        return np.einsum("kij,i,j->k", self._stack, x, x)

    def residual(self, x: Array) -> float:
        lv = self._levels(x)
        if isinstance(self.paramset, UnitBox):
            return float(np.max(lv) - 1.0)
        s = self.paramset.p / 2.0
        return float(np.sum(lv ** s) - 1.0)

    def _piece_projectors(self):
        if self._quads is not None:
            return [q.project for q in self._quads]
        return [self._project_pnorm]

    def _project_pnorm(self, p: Array) -> Array:
        """Dual bisection on the single smooth constraint sum (x R_k x)^(p/2) <= 1."""
        if self.residual(p) <= 0.0:
            return p
        s = self.paramset.p / 2.0

        def G_and_grad(x: Array):
            lv = self._levels(x)
            coef = 2.0 * s * np.where(lv > 0, lv, 0.0) ** (s - 1.0)
            g = np.einsum("k,kij,j->i", coef, self._stack, x)
            return float(np.sum(lv ** s)), g

        warm = {"x": p / 2.0}

        def x_of(lam: float) -> Array:
            # minimize 0.5||x-p||^2 + lam*G(x); 1-strongly convex, warm-started
            x = warm["x"]
            Gv, Gg = G_and_grad(x)
            fval = 0.5 * float((x - p) @ (x - p)) + lam * Gv
            step = 1.0
            for _ in range(200):
                g = (x - p) + lam * Gg
                gn = float(g @ g)
                if gn <= 1e-18 * (1.0 + fval * fval):
                    break
                while step > 1e-16:
                    x_new = x - step * g
                    Gv_new, Gg_new = G_and_grad(x_new)
                    f_new = 0.5 * float((x_new - p) @ (x_new - p)) + lam * Gv_new
                    if f_new <= fval - 0.25 * step * gn:
                        break
                    step *= 0.5
                x, fval, Gv, Gg = x_new, f_new, Gv_new, Gg_new
                step *= 1.7
            warm["x"] = x
            return x

        def h(lam: float) -> float:
            x = x_of(lam)
            return float(np.sum(self._levels(x) ** s)) - 1.0

        lam_hi = 1.0
        while h(lam_hi) > 0.0:
            lam_hi *= 4.0
            if lam_hi > 1e12:
                raise NonConvergence("pnorm ellitope projection bracket failed")
        lam = bisect_decreasing(h, 0.0, lam_hi, tol=max(lam_hi * 1e-11, 1e-14),
                                max_iter=60)
        return x_of(lam)

    def outer_radius(self) -> float:
        return float(np.sqrt(self.paramset.sum_cap() / self._sum_min_eig))

    def anchor_point(self) -> Array:
        return np.zeros(self.dim)

    def radial_feasible(self, z: Array, steps: int = 40) -> Array:
        # membership functions are homogeneous in the scaling, so the exact
        # feasibility factor is closed-form
        z = np.asarray(z, dtype=float)
        lv = self._levels(z)
        if isinstance(self.paramset, UnitBox):
            top = float(np.max(lv))
            t = 1.0 if top <= 1.0 else 1.0 / np.sqrt(top)
        else:
            s = self.paramset.p / 2.0
            g = float(np.sum(lv ** s))
            t = 1.0 if g <= 1.0 else g ** (-0.5 / s)
        return t * z


class HalfspaceCut(ConvexCompactSet):
    """base intersected with {x : normal . x <= offset}."""

    def __init__(self, base: ConvexCompactSet, normal: Array, offset: float):
        self.base = base
        self.normal = _freeze(np.atleast_1d(normal))
        if self.normal.shape != (base.dim,):
            raise DimensionMismatch("normal dimension mismatch")
        if float(self.normal @ self.normal) == 0.0:
            raise DomainViolation("halfspace normal must be nonzero")
        self.offset = float(offset)
        self.dim = base.dim
        self._half = _HalfspacePiece(self.normal, self.offset)
        self._empty_cache: dict[float, bool] = {}

    def _piece_projectors(self):
        return self.base._piece_projectors() + [self._half.project]

    def residual(self, x: Array) -> float:
        nrm = float(np.linalg.norm(self.normal))
        return max(self.base.residual(x), self._half.residual(x) / nrm)

    def outer_radius(self) -> float:
        return self.base.outer_radius()

    def anchor_point(self) -> Array:
        p = self.base.anchor_point()
        if self._half.residual(p) <= 0:
            return p
        try:
            return self.project(p)
        except NonConvergence:
            return p

    def is_empty(self, tol: float = 1e-8) -> bool:
        if tol not in self._empty_cache:
            _, val = self.base.support(-self.normal, tol=min(tol, 1e-9))
            best = -val  # min of normal . x over the base
            scale = 1.0 + self.outer_radius()
            nrm = float(np.linalg.norm(self.normal))
            self._empty_cache[tol] = (best - self.offset) / nrm > tol * scale
        return self._empty_cache[tol]

    def support(self, v: Array, tol: float = 1e-9) -> tuple[Array, float]:
        """Lagrangian dual over the cut: min over lam >= 0 of
        sup_base (v - lam n) . x + lam b; exact when the base support is."""
        if not self.base.exact_support:
            return super().support(v, tol=tol)
        v = _check_dim(v, self.dim)
        n, b = self.normal, self.offset

        def dual(lam: float) -> float:
            _, val = self.base.support(v - lam * n)
            return val + lam * b

        # the dual is convex in lam; golden-section over a grown bracket
        hi = 1.0
        d0 = dual(0.0)
        if self._half.residual(self.base.support(v)[0]) <= 0.0:
            x = self.base.support(v)[0]
            return x, float(v @ x)
        while dual(2.0 * hi) < dual(hi) and hi < 1e12:
            hi *= 2.0
        hi *= 2.0
        lo = 0.0
        phi = 0.5 * (np.sqrt(5.0) - 1.0)
        a, c = lo, hi
        x1 = c - phi * (c - a)
        x2 = a + phi * (c - a)
        f1, f2 = dual(x1), dual(x2)
        for _ in range(200):
            if c - a <= 1e-12 * (1.0 + abs(c)):
                break
            if f1 <= f2:
                c, x2, f2 = x2, x1, f1
                x1 = c - phi * (c - a)
                f1 = dual(x1)
            else:
                a, x1, f1 = x1, x2, f2
                x2 = a + phi * (c - a)
                f2 = dual(x2)
        lam = 0.5 * (a + c)
        val = dual(lam)
        point = self.project(self.base.support(v - lam * n)[0], tol=min(tol, 1e-8))
        return point, min(val, d0)


def _project_two_balls(a: Array, ra: float, b: Array, rb: float,
                       p: Array) -> Array:
    """Closed-form projection onto the intersection of two Euclidean balls."""
    if np.linalg.norm(p - a) <= ra and np.linalg.norm(p - b) <= rb:
        return p
    da = p - a
    na = float(np.linalg.norm(da))
    q = a + (ra / na) * da if na > ra else p
    if np.linalg.norm(q - b) <= rb * (1.0 + 1e-14):
        return q
    db = p - b
    nb = float(np.linalg.norm(db))
    q = b + (rb / nb) * db if nb > rb else p
    if np.linalg.norm(q - a) <= ra * (1.0 + 1e-14):
        return q
    # both constraints active: nearest point on the sphere-sphere circle
    d = b - a
    length = float(np.linalg.norm(d))
    u = d / length
    t_star = (length * length + ra * ra - rb * rb) / (2.0 * length)
    center = a + t_star * u
    rho = math.sqrt(max(ra * ra - t_star * t_star, 0.0))
    w = p - center
    w_perp = w - float(w @ u) * u
    nw = float(np.linalg.norm(w_perp))
    if nw <= 1e-300:
        # pick a deterministic direction orthogonal to u
        e = np.zeros_like(u)
        e[int(np.argmin(np.abs(u)))] = 1.0
        w_perp = e - float(e @ u) * u
        nw = float(np.linalg.norm(w_perp))
    return center + (rho / nw) * w_perp


class SeminormBallCut(ConvexCompactSet):
    """base intersected with {x : seminorm(x - center) <= radius}."""

    def __init__(self, base: ConvexCompactSet, seminorm, center: Array,
                 radius: float):
        self.base = base
        self.seminorm = seminorm
        self.center = _freeze(np.atleast_1d(center))
        if self.center.shape != (base.dim,):
            raise DimensionMismatch("cut center dimension mismatch")
        if radius < 0:
            raise DomainViolation("cut radius must be nonnegative")
        self.radius = float(radius)
        self.dim = base.dim
        self._ball_proj = seminorm.ball_projector(self.center, self.radius)
        self._empty_cache: dict[float, bool] = {}
        # ball-within-ball intersections have a closed-form projection
        self._plain = (isinstance(base, Ball) and radius > 0.0
                       and getattr(seminorm, "kind", None) == "l2"
                       and seminorm.matrix.shape == (self.dim, self.dim)
                       and np.array_equal(seminorm.matrix, np.eye(self.dim)))

    def _piece_projectors(self):
        if self._plain:
            return [self._project_plain]
        return self.base._piece_projectors() + [self._ball_proj]

    def _project_plain(self, p: Array) -> Array:
        return _project_two_balls(self.base.center, self.base.radius,
                                  self.center, self.radius, p)

    def residual(self, x: Array) -> float:
        return max(self.base.residual(x),
                   self.seminorm.eval(x - self.center) - self.radius)

    def outer_radius(self) -> float:
        return self.base.outer_radius()

    def anchor_point(self) -> Array:
        p = self.base.anchor_point()
        if self.seminorm.eval(p - self.center) <= self.radius:
            return p
        try:
            return self.project(p)
        except NonConvergence:
            return p

    def is_empty(self, tol: float = 1e-8) -> bool:
        if tol not in self._empty_cache:
            if self._plain:
                gap = (float(np.linalg.norm(self.base.center - self.center))
                       - self.base.radius - self.radius)
                scale = 1.0 + self.outer_radius()
                self._empty_cache[tol] = gap > tol * scale
            else:
                from .distance import seminorm_distance_to_point
                best, _ = seminorm_distance_to_point(
                    self.base, self.seminorm, self.center,
                    tol=max(min(tol, 1e-9), 1e-8))
                scale = 1.0 + self.outer_radius()
                self._empty_cache[tol] = best - self.radius > tol * scale
        return self._empty_cache[tol]


def project(set_: ConvexCompactSet, point: Array, tol: float = 1e-8) -> Array:
    """Euclidean projection of ``point`` onto ``set_`` within ``tol``."""
    return set_.project(point, tol=tol)
