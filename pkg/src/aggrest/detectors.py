"""Optimal pair detectors for convex hypotheses in simple observation schemes.

For hypotheses "the observation parameter lies in A_1(S_1)" versus
"... in A_2(S_2)", the affinity integral(sqrt(p_mu p_nu)) is maximized over
the two convex images.  The optimizer pair (mu*, nu*) induces the detector
phi = 0.5 ln(p_mu*/p_nu*); the simple K-observation test accepts the first
hypothesis iff the summed detector statistic is >= 0.

Every solved detector carries a certified risk: the suprema over both sides
of the detector's moment generating function are computed directly (linear
maximizations), so the stored eps_star is a valid per-observation risk bound
for the exact detector even when the inner maximization stopped short of the
optimum.  At the optimum the certificate coincides with exp(Opt).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DimensionMismatch, DomainViolation, NonConvergence,
                     ShapeMismatch, WrongScheme)
from .geometry.sets import ConvexCompactSet
from .normal import normal_cdf
from .schemes import (DISCRETE, GAUSSIAN, POISSON, SchemeSpec,
                      detector_coeffs, detector_statistic,
                      detector_statistic_batch, mgf_log_linear, validate_obs,
                      validate_param)
from .solvers import ascend_monotone

Array = np.ndarray

ACCEPT_1 = 1
ACCEPT_2 = 2


class AffineMap:
    """x -> matrix @ x + offset."""

    def __init__(self, matrix: Array, offset: Array | None = None):
        self.matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        m, n = self.matrix.shape
        self.offset = (np.zeros(m) if offset is None
                       else np.asarray(offset, dtype=float))
        if self.offset.shape != (m,):
            raise DimensionMismatch("affine offset dimension mismatch")
        self.out_dim, self.in_dim = m, n

    @classmethod
    def identity(cls, dim: int) -> "AffineMap":
        return cls(np.eye(dim))

    @classmethod
    def scaled_identity(cls, dim: int, c: float) -> "AffineMap":
        return cls(c * np.eye(dim))

    def apply(self, x: Array) -> Array:
        return self.matrix @ x + self.offset

    def __call__(self, x: Array) -> Array:
        return self.apply(x)


class HypothesisSide:
    """An affine map into the parameter domain together with a signal set."""

    def __init__(self, map_: AffineMap, set_: ConvexCompactSet,
                 scheme: SchemeSpec | None = None, validate: bool = True):
        if map_.in_dim != set_.dim:
            raise DimensionMismatch("map input dim must match the signal set")
        self.map = map_
        self.set = set_
        if validate and scheme is not None:
            self.check_domain(scheme)

    def check_domain(self, scheme: SchemeSpec, n_dirs: int = 8) -> None:
        """Sampled invariant check: the image of the set stays in the domain."""
        if self.map.out_dim != scheme.dim:
            raise DimensionMismatch("map output dim must match the scheme")
        if self.set.is_empty():
            return
        rng = np.random.default_rng(20240311)
        pts = [self.set.anchor_point()]
        r = self.set.outer_radius()
        for _ in range(n_dirs):
            d = rng.standard_normal(self.set.dim)
            pts.append(self.set.project(d * (2.0 * r + 1.0)))
        for x in pts:
            validate_param(scheme, self.map.apply(x))

    def image_support(self, v: Array, tol: float = 1e-9) -> float:
        """sup over the side of v . (A x + a)."""
        _, val = self.set.support(self.map.matrix.T @ v, tol=tol)
        return val + float(v @ self.map.offset)

    def is_empty(self) -> bool:
        return self.set.is_empty()


@dataclass(frozen=True)
class EmptySideOutcome:
    """Returned when at least one hypothesis side is empty.

    The associated test accepts the nonempty hypothesis (the first one when
    both are empty) and has zero risk.
    """

    side1_empty: bool
    side2_empty: bool

    @property
    def accepts(self) -> int:
        return ACCEPT_2 if (self.side1_empty and not self.side2_empty) else ACCEPT_1


@dataclass
class DetectorResult:
    """Optimal detector for one pair of convex hypotheses."""

    scheme: SchemeSpec
    mu_star: Array
    nu_star: Array
    opt: float
    eps_star: float
    weights: Array
    const: float
    shift: float = 0.0
    x_star: Array | None = None
    y_star: Array | None = None
    trace: list = field(default_factory=list, repr=False)

    def statistic(self, obs: Array, k: int | None = None) -> float:
        """Summed detector value over a K-row observation block."""
        block = validate_obs(self.scheme, obs, k=k)
        return detector_statistic(self.scheme, self.weights, self.const, block)

    def batch_statistics(self, blocks: Array) -> Array:
        return detector_statistic_batch(self.scheme, self.weights, self.const,
                                        blocks)

    def decide(self, obs: Array, k: int | None = None) -> int:
        return ACCEPT_1 if self.statistic(obs, k=k) - self.shift >= 0.0 else ACCEPT_2

    def swapped(self) -> "DetectorResult":
        """The detector for the sides in reverse order (negated statistic)."""
        w, c = detector_coeffs(self.scheme, self.nu_star, self.mu_star)
        return DetectorResult(self.scheme, self.nu_star, self.mu_star,
                              self.opt, self.eps_star, w, c, -self.shift,
                              self.y_star, self.x_star)


def _objective(scheme: SchemeSpec, side1: HypothesisSide,
               side2: HypothesisSide):
    """ln affinity of the mapped pair and its gradient in (x, y)."""
    A1, a1 = side1.map.matrix, side1.map.offset
    A2, a2 = side2.map.matrix, side2.map.offset
    n1 = side1.set.dim

    if scheme.family == GAUSSIAN:
        def value_grad(z):
            x, y = z[:n1], z[n1:]
            u = (A1 @ x + a1) - (A2 @ y + a2)
            f = -0.125 * float(u @ u)
            gx = -0.25 * (A1.T @ u)
            gy = 0.25 * (A2.T @ u)
            return f, np.concatenate([gx, gy])
        return value_grad

    def images(z):
        x, y = z[:n1], z[n1:]
        mu = A1 @ x + a1
        nu = A2 @ y + a2
        if np.min(mu) <= 0.0 or np.min(nu) <= 0.0:
            raise DomainViolation(
                "iterate image left the parameter domain; invalid hypothesis side")
        return mu, nu

    if scheme.family == POISSON:
        def value_grad(z):
            mu, nu = images(z)
            rm, rn = np.sqrt(mu), np.sqrt(nu)
            f = -0.5 * float(np.sum((rm - rn) ** 2))
            dmu = 0.5 * (rn / rm - 1.0)
            dnu = 0.5 * (rm / rn - 1.0)
            return f, np.concatenate([A1.T @ dmu, A2.T @ dnu])
        return value_grad

    def value_grad(z):
        mu, nu = images(z)
        s = np.sqrt(mu * nu)
        total = float(np.sum(s))
        f = math.log(total)
        dmu = 0.5 * (s / mu) / total
        dnu = 0.5 * (s / nu) / total
        return f, np.concatenate([A1.T @ dmu, A2.T @ dnu])
    return value_grad


def certify_detector(scheme: SchemeSpec, side1: HypothesisSide,
                     side2: HypothesisSide, weights: Array, const: float,
                     tol: float = 1e-9) -> float:
    """ln of the certified per-observation risk of the affine detector.

    max over the two sides of sup E[exp(-phi)] resp. sup E[exp(+phi)]; both
    suprema are linear maximizations over the sides' images.  Returned in
    log space (clipped at 0) so extreme separations do not underflow.
    """
    vals = []
    for side, sign in ((side1, -1.0), (side2, 1.0)):
        a, b, log_space = mgf_log_linear(scheme, weights, const, sign)
        sup = side.image_support(a, tol=tol)
        vals.append(sup + b if log_space else math.log(max(sup, 1e-300)))
    return float(min(max(vals), 0.0))  # log of the certified risk, <= 0


def solve_pair(scheme: SchemeSpec, side1: HypothesisSide,
               side2: HypothesisSide, tol: float = 1e-9,
               max_iter: int = 50_000):
    """Maximize the affinity of the mapped hypothesis pair; build the detector.

    Returns a DetectorResult, or an EmptySideOutcome when a side is empty.
    The stored eps_star is the certified risk (see certify_detector), equal
    to exp(Opt) at the exact optimum.
    """
    if tol <= 0:
        raise DomainViolation("tol must be positive")
    base = scheme.base()
    if side1.map.out_dim != base.dim or side2.map.out_dim != base.dim:
        raise DimensionMismatch("side images must live in the scheme domain")
    e1, e2 = side1.is_empty(), side2.is_empty()
    if e1 or e2:
        return EmptySideOutcome(e1, e2)

    n1 = side1.set.dim
    value_grad = _objective(base, side1, side2)

    def project(z):
        return np.concatenate([side1.set.project(z[:n1], tol=min(tol, 1e-8)),
                               side2.set.project(z[n1:], tol=min(tol, 1e-8))])

    z0 = np.concatenate([side1.set.anchor_point(), side2.set.anchor_point()])
    lip = (np.linalg.norm(side1.map.matrix, 2)
           + np.linalg.norm(side2.map.matrix, 2)) ** 2 / 4.0
    step0 = 1.0 / max(lip, 1e-12) if base.family == GAUSSIAN else 1.0
    z, f, trace = ascend_monotone(value_grad, project, z0, step0=step0,
                                  tol=tol, max_iter=max_iter)
    x_star, y_star = z[:n1], z[n1:]
    mu_star = side1.map.apply(x_star)
    nu_star = side2.map.apply(y_star)
    w, c = detector_coeffs(base, mu_star, nu_star)
    opt = certify_detector(base, side1, side2, w, c, tol=min(tol, 1e-9))
    eps = math.exp(max(opt, -700.0))  # keep eps_star in (0, 1]
    return DetectorResult(base, mu_star, nu_star, opt, eps, w, c, 0.0,
                          x_star, y_star, trace)


def run_test(det, k: int, obs: Array) -> int:
    """Simple test decision on a K-row block: ACCEPT_1 iff statistic - shift >= 0."""
    if isinstance(det, EmptySideOutcome):
        return det.accepts
    block = validate_obs(det.scheme, obs, k=k)
    if det.scheme.family != DISCRETE and block.shape[0] != k:
        raise ShapeMismatch("block row count must equal k")
    stat = detector_statistic(det.scheme, det.weights, det.const, block)
    return ACCEPT_1 if stat - det.shift >= 0.0 else ACCEPT_2


def required_K(eps_existing: float, kbar: int, target_eps: float | None = None) -> int:
    """Observation count at which the detector test matches a risk-eps oracle.

    ceil(2 ln(1/target) / ln(1/(4 eps (1 - eps))) * kbar); target defaults to
    eps_existing.
    """
    if not 0.0 < eps_existing < 0.5:
        raise DomainViolation("eps_existing must lie in (0, 1/2)")
    if kbar < 1:
        raise DomainViolation("kbar must be a positive integer")
    target = eps_existing if target_eps is None else target_eps
    if not 0.0 < target < 1.0:
        raise DomainViolation("target_eps must lie in (0, 1)")
    denom = math.log(1.0 / (4.0 * eps_existing * (1.0 - eps_existing)))
    return int(math.ceil(2.0 * math.log(1.0 / target) / denom * kbar))


def gaussian_exact_risk(det: DetectorResult, k: int) -> float:
    """Exact test risk in the Gaussian scheme: 1 - Phi(0.5 ||mu*-nu*|| sqrt(K))."""
    if det.scheme.family != GAUSSIAN:
        raise WrongScheme("exact risk formula applies to the Gaussian scheme")
    gap = float(np.linalg.norm(det.mu_star - det.nu_star))
    return 1.0 - normal_cdf(0.5 * gap * math.sqrt(k))
