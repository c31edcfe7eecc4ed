"""Union-vs-union inference: decide whether the observation parameter lies in
a union of "blue" convex sets or a union of "red" ones.

Pairwise detectors are solved for every (blue, red) pair; their K-power risks
fill an entrywise-positive matrix whose Perron-Frobenius data supplies both
the overall risk bound eps_K (the spectral norm) and the per-pair shifts
alpha_ij = ln(h_j / g_i) that balance the detector statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .detectors import (DetectorResult, EmptySideOutcome, HypothesisSide,
                        solve_pair)
from .errors import DomainViolation, PowerIterationStall, ShapeMismatch
from .schemes import SchemeSpec, validate_obs

Array = np.ndarray

BLUE = "blue"
RED = "red"


@dataclass
class ColorProblem:
    """Nonempty blue and red hypothesis collections plus the power K."""

    blues: list[HypothesisSide]
    reds: list[HypothesisSide]
    k: int

    def __post_init__(self):
        if self.k < 1:
            raise DomainViolation("k must be a positive integer")
        if not self.blues and not self.reds:
            raise DomainViolation("all hypotheses empty: nothing to infer")


def perron_data(e_matrix: Array, tol: float = 1e-12,
                max_iter: int = 100_000, stall_window: int = 1500):
    """Spectral norm and positive Perron vector of [[0, E], [E^T, 0]].

    Power iteration runs on the identity-shifted matrix (the unshifted one has
    a symmetric +/- spectrum), start vector all-ones.  Returns
    (eps_k, g, h, alpha) with alpha[i, j] = ln(h_j / g_i).
    """
    E = np.asarray(e_matrix, dtype=float)
    if E.ndim != 2 or np.any(E <= 0.0):
        raise DomainViolation("risk matrix must be entrywise positive")
    b, r = E.shape
    n = b + r
    M = np.zeros((n, n))
    M[:b, b:] = E
    M[b:, :b] = E.T
    # scale-aware shift: keeps the dominant eigenvalue simple and the
    # convergence rate independent of the overall matrix magnitude
    shift = float(np.max(np.sum(np.abs(M), axis=1))) + 1e-300
    v = np.ones(n) / math.sqrt(n)
    lam = 0.0
    converged = False
    for _ in range(min(max_iter, stall_window)):
        w = M @ v + shift * v
        nw = float(np.linalg.norm(w))
        v_new = w / nw
        lam = float(v_new @ (M @ v_new))
        resid = float(np.max(np.abs(M @ v_new - lam * v_new)))
        v = v_new
        if resid <= max(tol, 1e-15) * max(float(np.max(np.abs(v))), 1e-300):
            converged = True
            break
    if not converged:
        # near-tied second singular value (symmetric problem geometry) makes
        # the iteration arbitrarily slow; finish with a dense eigensolve
        evals, evecs = np.linalg.eigh(M)
        lam = float(evals[-1])
        v = evecs[:, -1]
        if float(np.sum(v)) < 0.0:
            v = -v
    if np.any(v <= 0.0):
        raise PowerIterationStall("Perron vector not entrywise positive")
    g, h = v[:b], v[b:]
    alpha = np.log(h)[None, :] - np.log(g)[:, None]
    return lam, g, h, alpha


@dataclass
class ColorTest:
    """Pairwise detectors plus Perron-Frobenius shifts for union testing."""

    scheme: SchemeSpec
    k: int
    detectors: list  # detectors[i][j] decides blue_i (H1) vs red_j (H2)
    e_matrix: Array  # entry (i, j) = eps_ij ** k
    eps_k: float
    g: Array
    h: Array
    alpha: Array
    blue_indices: list = field(default_factory=list)
    red_indices: list = field(default_factory=list)

    def statistics(self, obs: Array) -> Array:
        """Matrix of summed detector statistics for one K-block."""
        block = validate_obs(self.scheme.base(), obs, k=self.k)
        b, r = self.e_matrix.shape
        out = np.empty((b, r))
        for i in range(b):
            for j in range(r):
                out[i, j] = self.detectors[i][j].statistic(block, k=self.k)
        return out

    def infer(self, obs: Array) -> str:
        """BLUE iff some blue index beats every red one after the shifts."""
        s = self.statistics(obs)
        return BLUE if bool(np.any(np.all(s - self.alpha >= 0.0, axis=1))) else RED

    def batch_infer(self, blocks: Array) -> Array:
        """Boolean array (True = BLUE) for a stack of K-blocks."""
        b, r = self.e_matrix.shape
        n = np.asarray(blocks).shape[0]
        ok = np.ones((n, b), dtype=bool)
        for i in range(b):
            for j in range(r):
                stat = self.detectors[i][j].batch_statistics(blocks)
                ok[:, i] &= stat - self.alpha[i, j] >= 0.0
        return np.any(ok, axis=1)


def build_color_test(scheme: SchemeSpec, prob: ColorProblem,
                     tol: float = 1e-9) -> ColorTest:
    """Solve all pairwise problems and assemble the color-inferring test.

    Every listed side must be nonempty (callers prune empties and record the
    original indexing in blue_indices / red_indices).
    """
    if not prob.blues or not prob.reds:
        raise DomainViolation("build_color_test needs both colors nonempty; "
                              "single-color problems short-circuit upstream")
    base = scheme.base()
    b, r = len(prob.blues), len(prob.reds)
    detectors: list[list[DetectorResult]] = []
    E = np.empty((b, r))
    for i, blue in enumerate(prob.blues):
        row = []
        for j, red in enumerate(prob.reds):
            det = solve_pair(base, blue, red, tol=tol)
            if isinstance(det, EmptySideOutcome):
                raise DomainViolation(
                    "empty side reached build_color_test; prune empties first")
            row.append(det)
            # floored: a larger per-pair risk certificate stays valid and
            # keeps the Perron data numerically meaningful
            E[i, j] = max(det.eps_star ** prob.k, 1e-12)
        detectors.append(row)
    eps_k, g, h, alpha = perron_data(E, tol=min(tol, 1e-12))
    return ColorTest(base, prob.k, detectors, E, eps_k, g, h, alpha,
                     blue_indices=list(range(b)), red_indices=list(range(r)))


def infer_color(test: ColorTest, obs: Array) -> str:
    """Color decision for one K-row observation block."""
    block = np.asarray(obs)
    if test.scheme.family != "discrete" and (
            block.ndim != 2 or block.shape[0] != test.k):
        raise ShapeMismatch(f"block must have {test.k} rows")
    return test.infer(obs)


def required_K_multi(eps_existing: float, kbar: int, b: int, r: int,
                     target_eps: float) -> int:
    """Observation count for the union test to reach the target risk.

    ceil(2 ln(max[b, r] / target) / ln(1/(4 eps (1 - eps))) * kbar).
    """
    if not 0.0 < eps_existing < 0.5:
        raise DomainViolation("eps_existing must lie in (0, 1/2)")
    if not 0.0 < target_eps < 1.0:
        raise DomainViolation("target_eps must lie in (0, 1)")
    if kbar < 1 or b < 1 or r < 1:
        raise DomainViolation("kbar, b, r must be positive integers")
    denom = math.log(1.0 / (4.0 * eps_existing * (1.0 - eps_existing)))
    num = 2.0 * math.log(max(b, r) / target_eps)
    return int(math.ceil(num / denom * kbar))
