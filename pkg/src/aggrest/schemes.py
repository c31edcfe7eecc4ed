"""Simple observation schemes: Gaussian, Poisson, Discrete, and their powers.

A scheme couples an observation space with a parametric density family over a
convex parameter domain.  Observations with power K are stationary K-repeated
blocks: Gaussian and Poisson blocks have shape (K, d); Discrete observations
are category indices with shape (K,).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainViolation, ShapeMismatch

Array = np.ndarray

GAUSSIAN = "gaussian"
POISSON = "poisson"
DISCRETE = "discrete"

_FAMILIES = (GAUSSIAN, POISSON, DISCRETE)
_POSITIVITY_FLOOR = 1e-12


@dataclass(frozen=True)
class SchemeSpec:
    """Observation scheme family with dimension and repetition power."""

    family: str
    dim: int
    power: int = 1

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise DomainViolation(f"unknown scheme family {self.family!r}")
        if self.dim < 1:
            raise DomainViolation("scheme dim must be >= 1")
        if self.power < 1:
            raise DomainViolation("scheme power must be >= 1")

    def base(self) -> "SchemeSpec":
        return SchemeSpec(self.family, self.dim, 1)


def validate_param(scheme: SchemeSpec, mu: Array) -> Array:
    """Check that mu lies (strictly) in the scheme's parameter domain."""
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (scheme.dim,):
        raise DomainViolation(
            f"parameter point must have shape ({scheme.dim},), got {mu.shape}")
    if scheme.family == GAUSSIAN:
        if not np.all(np.isfinite(mu)):
            raise DomainViolation("Gaussian mean must be finite")
    elif scheme.family == POISSON:
        if np.min(mu) <= _POSITIVITY_FLOOR:
            raise DomainViolation("Poisson intensities must exceed 1e-12")
    else:
        if np.min(mu) <= _POSITIVITY_FLOOR:
            raise DomainViolation("Discrete probabilities must exceed 1e-12")
        if abs(float(np.sum(mu)) - 1.0) > 1e-12 * max(1.0, scheme.dim):
            raise DomainViolation("Discrete probabilities must sum to 1")
    return mu


@dataclass(frozen=True)
class ParamPoint:
    """A distribution parameter mu validated against its scheme."""

    scheme: SchemeSpec
    mu: Array

    def __post_init__(self):
        object.__setattr__(self, "mu", validate_param(self.scheme, self.mu))


def _as_mu(scheme: SchemeSpec, point) -> Array:
    if isinstance(point, ParamPoint):
        return point.mu
    return validate_param(scheme, point)


# ---------------------------------------------------------------------------
# affinity


def log_affinity(scheme: SchemeSpec, mu, nu) -> float:
    """ln of the single-observation affinity integral(sqrt(p_mu p_nu))."""
    m = _as_mu(scheme, mu)
    n = _as_mu(scheme, nu)
    if scheme.family == GAUSSIAN:
        d = m - n
        return -0.125 * float(d @ d)
    if scheme.family == POISSON:
        d = np.sqrt(m) - np.sqrt(n)
        return -0.5 * float(d @ d)
    return float(np.log(np.sum(np.sqrt(m * n))))


def affinity(scheme: SchemeSpec, mu, nu) -> float:
    """Single-observation affinity; requires power 1 (see affinity_power)."""
    if scheme.power != 1:
        raise DomainViolation("affinity is defined for power-1 schemes")
    return float(np.exp(log_affinity(scheme, mu, nu)))


def affinity_power(scheme: SchemeSpec, mu, nu) -> float:
    """Affinity of the K-repeated scheme: (base affinity)^K exactly."""
    base = affinity(scheme.base(), mu, nu)
    return base ** scheme.power


# ---------------------------------------------------------------------------
# observations


def validate_obs(scheme: SchemeSpec, obs: Array, k: int | None = None) -> Array:
    """Check an observation block against the scheme's sample space."""
    k = scheme.power if k is None else k
    obs = np.asarray(obs)
    if scheme.family == DISCRETE:
        if obs.ndim == 2 and obs.shape[1] == 1:
            obs = obs[:, 0]
        if obs.shape != (k,):
            raise ShapeMismatch(f"discrete block must have shape ({k},)")
        idx = obs.astype(int)
        if np.any(idx != obs) or np.any(idx < 0) or np.any(idx >= scheme.dim):
            raise DomainViolation("discrete observations are category indices")
        return idx
    if obs.shape != (k, scheme.dim):
        raise ShapeMismatch(
            f"observation block must have shape ({k}, {scheme.dim}), got {obs.shape}")
    if scheme.family == POISSON:
        ints = np.rint(obs)
        if np.any(np.abs(obs - ints) > 0) or np.any(ints < 0):
            raise DomainViolation("Poisson observations are nonnegative integers")
        return ints.astype(float)
    return obs.astype(float)


def log_lr(scheme: SchemeSpec, mu, nu, obs: Array) -> float:
    """Log-likelihood ratio sum_t ln(p_mu(w_t) / p_nu(w_t)) over the block."""
    m = _as_mu(scheme, mu)
    n = _as_mu(scheme, nu)
    block = validate_obs(scheme, obs)
    if scheme.family == GAUSSIAN:
        d = m - n
        return float(np.sum(block @ d) - 0.5 * scheme.power * (m @ m - n @ n))
    if scheme.family == POISSON:
        return float(np.sum(block @ np.log(m / n))
                     - scheme.power * float(np.sum(m - n)))
    return float(np.sum(np.log(m[block] / n[block])))


def sample(scheme: SchemeSpec, mu, rng: np.random.Generator,
           k: int | None = None) -> Array:
    """K i.i.d. draws from p_mu; bit-reproducible given the generator state."""
    m = _as_mu(scheme, mu)
    k = scheme.power if k is None else int(k)
    if scheme.family == GAUSSIAN:
        return m[None, :] + rng.standard_normal((k, scheme.dim))
    if scheme.family == POISSON:
        return rng.poisson(m[None, :], size=(k, scheme.dim)).astype(float)
    cdf = np.cumsum(m)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(k), side="right").astype(int)


# ---------------------------------------------------------------------------
# detector support: affine statistics and their moment generating functions


def detector_coeffs(scheme: SchemeSpec, mu, nu) -> tuple[Array, float]:
    """Coefficients (w, c) of phi(w_t) = 0.5 ln(p_mu/p_nu) as an affine
    functional of one observation; Discrete uses w as a lookup table, c = 0."""
    m = _as_mu(scheme, mu)
    n = _as_mu(scheme, nu)
    if scheme.family == GAUSSIAN:
        w = 0.5 * (m - n)
        c = 0.25 * float(n @ n - m @ m)
        return w, c
    if scheme.family == POISSON:
        w = 0.5 * np.log(m / n)
        c = -0.5 * float(np.sum(m - n))
        return w, c
    return 0.5 * np.log(m / n), 0.0


def detector_statistic(scheme: SchemeSpec, w: Array, c: float,
                       obs: Array) -> float:
    """sum_t phi(w_t) for the affine detector (w, c) over the block."""
    block = validate_obs(scheme, obs)
    if scheme.family == DISCRETE:
        return float(np.sum(w[block]))
    return float(block @ w + c * block.shape[0])


def detector_statistic_batch(scheme: SchemeSpec, w: Array, c: float,
                             blocks: Array) -> Array:
    """Vectorized detector statistics; blocks has shape (n, K, d) or (n, K)."""
    if scheme.family == DISCRETE:
        idx = np.asarray(blocks, dtype=int)
        return np.sum(w[idx], axis=-1)
    arr = np.asarray(blocks, dtype=float)
    return np.tensordot(arr, w, axes=([2], [0])).sum(axis=1) + c * arr.shape[1]


def mgf_log_linear(scheme: SchemeSpec, w: Array, c: float,
                   sign: float) -> tuple[Array, float, bool]:
    """Represent ln E_mu[exp(sign * phi)] for one observation.

    Returns (a, b, log_space): when log_space, the value is a . mu + b;
    otherwise (Discrete) the expectation itself is a . mu and b is unused.
    Both forms are linear in mu, so suprema over convex hypotheses reduce to
    support-function evaluations.
    """
    if scheme.family == GAUSSIAN:
        return sign * w, sign * c + 0.5 * float(w @ w), True
    if scheme.family == POISSON:
        return np.expm1(sign * w), sign * c, True
    return np.exp(sign * w), 0.0, False
