"""Test-based aggregation of candidate points over a union of convex sets.

Given candidate points x_1..x_N and observations stemming from a signal in a
union of convex pieces, the routines select a candidate nearly as close to
the signal as the best one.  Pairwise comparisons are decided by union-vs-
union color tests built on distance-threshold hypotheses:

* general seminorm: hypotheses "signal within r_ij - delta of x_i" (pieces
  are seminorm-ball cuts of the union members), thresholds found by
  bisection over appropriate delta;
* Euclidean seminorm: hypotheses "signal closer to x_i than to x_j by a
  margin delta", realized through the supporting halfspace of the margin
  region, with scores counting lost comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .colors import BLUE, ColorProblem, ColorTest, build_color_test
from .detectors import AffineMap, HypothesisSide
from .errors import DimensionMismatch, DomainViolation
from .geometry.distance import seminorm_distance_to_point
from .geometry.seminorms import Seminorm
from .geometry.sets import ConvexCompactSet, HalfspaceCut, SeminormBallCut
from .schemes import SchemeSpec

Array = np.ndarray

GENL_5_1 = "genl_5_1"
EUCL_5_2 = "eucl_5_2"
PROP_5_3 = "prop_5_3"
PROP_5_4 = "prop_5_4"


@dataclass
class AggregationProblem:
    """Union pieces with their observation maps, candidates, and budgets."""

    scheme: SchemeSpec
    pieces: list[ConvexCompactSet]
    maps: list[AffineMap]
    seminorm: Seminorm
    points: Array  # (N, n) candidate rows
    eps: float
    k: int
    delta_floor: float | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if len(self.pieces) != len(self.maps) or not self.pieces:
            raise DimensionMismatch("pieces and maps must pair up")
        if self.points.shape[0] < 2:
            raise DomainViolation("aggregation needs at least two candidates")
        if not 0.0 < self.eps < 0.5:
            raise DomainViolation("eps must lie in (0, 1/2)")
        if self.k < 1:
            raise DomainViolation("k must be a positive integer")
        scale = 1.0 + max(p.outer_radius() for p in self.pieces)
        n = self.points.shape[0]
        for a in range(n):
            for b in range(a + 1, n):
                if self.seminorm.eval(self.points[a] - self.points[b]) < 1e-9 * scale:
                    raise DomainViolation(
                        f"candidates {a} and {b} coincide in the seminorm")
        if self.delta_floor is None:
            r_max = max(0.5 * self.seminorm.eval(self.points[a] - self.points[b])
                        for a in range(n) for b in range(a + 1, n))
            self.delta_floor = 1e-6 * (1.0 + r_max)

    @property
    def n_candidates(self) -> int:
        return self.points.shape[0]

    def pair_radius(self, i: int, j: int) -> float:
        return 0.5 * self.seminorm.eval(self.points[i] - self.points[j])


def compute_rho(problem: AggregationProblem, tol: float = 1e-7) -> Array:
    """rho_i = distance from candidate i to the union, in the seminorm."""
    n = problem.n_candidates
    rho = np.empty(n)
    for i in range(n):
        vals = []
        for piece in problem.pieces:
            v, _ = seminorm_distance_to_point(piece, problem.seminorm,
                                              problem.points[i], tol=tol)
            vals.append(v)
        rho[i] = min(vals)
    return rho


# ---------------------------------------------------------------------------
# general-seminorm route


@dataclass
class GeneralPairTest:
    """Color test deciding "signal near x_i" (red) vs "near x_j" (blue)."""

    i: int
    j: int
    delta: float
    color_test: ColorTest | None  # None when one side is entirely empty
    empty_red: bool = False
    empty_blue: bool = False

    def i_loses(self, obs) -> bool:
        if self.color_test is None:
            return self.empty_red and not self.empty_blue
        return self.color_test.infer(obs) == BLUE

    def i_loses_batch(self, blocks) -> Array:
        n = np.asarray(blocks).shape[0]
        if self.color_test is None:
            return np.full(n, self.empty_red and not self.empty_blue)
        return self.color_test.batch_infer(blocks)


def _threshold_sides(problem: AggregationProblem, center: Array,
                     radius: float) -> list[HypothesisSide]:
    """Nonempty mapped pieces of {x in union piece: ||x - center|| <= radius}."""
    sides = []
    if radius < 0.0:
        return sides
    for piece, mp in zip(problem.pieces, problem.maps):
        cut = SeminormBallCut(piece, problem.seminorm, center, radius)
        if not cut.is_empty():
            sides.append(HypothesisSide(mp, cut, validate=False))
    return sides


def _appropriateness_check(problem: AggregationProblem, i: int, j: int,
                           delta: float, tol: float) -> GeneralPairTest | None:
    """Build the color test at threshold delta; None when not appropriate."""
    r_ij = problem.pair_radius(i, j)
    reds = _threshold_sides(problem, problem.points[i], r_ij - delta)
    blues = _threshold_sides(problem, problem.points[j], r_ij - delta)
    if not reds or not blues:
        return GeneralPairTest(i, j, delta, None,
                               empty_red=not reds, empty_blue=not blues)
    test = build_color_test(problem.scheme,
                            ColorProblem(blues, reds, problem.k), tol=tol)
    level = problem.eps / (problem.n_candidates - 1)
    if test.eps_k <= level:
        return GeneralPairTest(i, j, delta, test)
    return None


def appropriateness_bisect(problem: AggregationProblem, i: int, j: int,
                           tol_delta: float | None = None,
                           tol: float = 1e-9):
    """Smallest appropriate threshold for the pair, by bisection.

    Returns (appropriate, delta_tilde, test); (False, None, None) when even
    the largest usable threshold fails the per-pair risk budget.
    """
    r_ij = problem.pair_radius(i, j)
    if tol_delta is None:
        tol_delta = 1e-3 * r_ij
    rho = compute_rho(problem)
    delta_bar = r_ij - max(rho[i], rho[j])
    if delta_bar < 0.0:
        return False, None, None
    best = _appropriateness_check(problem, i, j, delta_bar, tol)
    if best is None:
        return False, None, None
    lo, hi = 0.0, delta_bar
    low_test = _appropriateness_check(problem, i, j, 0.0, tol)
    if low_test is not None:
        return True, 0.0, low_test
    while hi - lo > tol_delta:
        mid = 0.5 * (lo + hi)
        cand = _appropriateness_check(problem, i, j, mid, tol)
        if cand is not None:
            hi, best = mid, cand
        else:
            lo = mid
    return True, hi, best


@dataclass
class PairSetup:
    """Thresholds and tests for every unordered candidate pair."""

    rho: Array
    r: Array                  # pairwise radii
    delta: Array              # symmetric threshold matrix
    comparable: dict          # {(i, j) i<j: GeneralPairTest}

    def is_comparable(self, i: int, j: int) -> bool:
        return (min(i, j), max(i, j)) in self.comparable


def build_general_setup(problem: AggregationProblem,
                        comparable_pairs: list | None = None,
                        tol_delta: float | None = None,
                        tol: float = 1e-9) -> PairSetup:
    """Run the appropriateness bisection for all (or the selected) pairs.

    The comparable set defaults to every appropriate pair; incomparable
    pairs get the threshold max[0, r_ij - max(rho_i, rho_j)].
    """
    n = problem.n_candidates
    rho = compute_rho(problem)
    r = np.zeros((n, n))
    delta = np.zeros((n, n))
    comparable: dict = {}
    wanted = (None if comparable_pairs is None
              else {(min(a, b), max(a, b)) for a, b in comparable_pairs})
    for i in range(n):
        for j in range(i + 1, n):
            r[i, j] = r[j, i] = problem.pair_radius(i, j)
            if wanted is None or (i, j) in wanted:
                ok, d, test = appropriateness_bisect(problem, i, j,
                                                     tol_delta=tol_delta, tol=tol)
                if ok:
                    comparable[(i, j)] = test
                    delta[i, j] = delta[j, i] = d
                    continue
            delta[i, j] = delta[j, i] = max(0.0, r[i, j] - max(rho[i], rho[j]))
    return PairSetup(rho, r, delta, comparable)


@dataclass
class AggregationOutcome:
    """Selected candidate with the audit trail of the comparison pass."""

    chosen_index: int
    estimate: Array
    admissible: list
    scores: Array | None = None
    losses: dict | None = None
    bound_report: dict = field(default_factory=dict)


def aggregate_general(problem: AggregationProblem, setup: PairSetup, obs,
                      truth: Array | None = None) -> AggregationOutcome:
    """Winner-by-smallest-worst-loss aggregation for a general seminorm.

    With ``truth`` supplied (test mode) the report evaluates the guarantee
    3 ||x_i* - truth|| + 2 max_{j in losses(i*)} Delta_{i*j}.
    """
    n = problem.n_candidates
    loses_to: dict[int, list[int]] = {i: [] for i in range(n)}
    for i in range(n):
        for j in range(i + 1, n):
            test = setup.comparable.get((i, j))
            if test is not None:
                if test.i_loses(obs):
                    loses_to[i].append(j)
                else:
                    loses_to[j].append(i)
            else:
                if setup.rho[j] <= setup.rho[i]:
                    loses_to[i].append(j)
                else:
                    loses_to[j].append(i)
    d = np.full(n, -np.inf)
    for i in range(n):
        if loses_to[i]:
            d[i] = max(problem.seminorm.eval(problem.points[j] - problem.points[i])
                       for j in loses_to[i])
    chosen = int(np.argmin(d))
    report: dict = {}
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        dist = [problem.seminorm.eval(p - truth) for p in problem.points]
        i_star = int(np.argmin(dist))
        delta_bar = (max(setup.delta[i_star, j] for j in loses_to[i_star])
                     if loses_to[i_star] else 0.0)
        report["i_star"] = i_star
        report["guarantee_rhs"] = 3.0 * dist[i_star] + 2.0 * delta_bar
        report["error"] = problem.seminorm.eval(problem.points[chosen] - truth)
    return AggregationOutcome(chosen, problem.points[chosen].copy(),
                              admissible=[i for i in range(n) if not loses_to[i]],
                              losses=loses_to, bound_report=report)


# ---------------------------------------------------------------------------
# Euclidean-seminorm route


def margin_halfspace_cut(piece: ConvexCompactSet, s: Seminorm, x_near: Array,
                         x_far: Array, delta: float) -> HalfspaceCut:
    """Supporting-halfspace outer approximation of
    {z in piece : ||z - x_far|| >= delta + ||z - x_near||} (Euclidean s).

    The margin region is contained in {psi.(Bz - mid) <= -delta/2} where psi
    is the unit vector from B x_near toward B x_far; membership in the exact
    region is checked by margin_residual.
    """
    B = s.matrix
    w_n, w_f = B @ x_near, B @ x_far
    gap = w_f - w_n
    norm = float(np.linalg.norm(gap))
    psi = gap / norm
    mid = 0.5 * (w_n + w_f)
    return HalfspaceCut(piece, B.T @ psi, float(psi @ mid) - 0.5 * delta)


def margin_residual(s: Seminorm, z: Array, x_near: Array, x_far: Array,
                    delta: float) -> float:
    """<= 0 iff z satisfies the exact margin inequality."""
    return (delta + s.eval(z - x_near)) - s.eval(z - x_far)


@dataclass
class EuclidPairTest:
    """Test of "closer to x_i by the margin" vs "closer to x_j"."""

    i: int
    j: int
    delta: float
    color_test: ColorTest | None
    empty_red: bool = False   # red: near-i margin region
    empty_blue: bool = False

    def rejects_near_i(self, obs) -> bool:
        if self.color_test is None:
            return self.empty_red and not self.empty_blue
        return self.color_test.infer(obs) == BLUE

    def rejects_near_j(self, obs) -> bool:
        if self.color_test is None:
            return self.empty_blue and not self.empty_red
        return self.color_test.infer(obs) != BLUE

    def rejects_near_i_batch(self, blocks) -> Array:
        n = np.asarray(blocks).shape[0]
        if self.color_test is None:
            return np.full(n, self.empty_red and not self.empty_blue)
        return self.color_test.batch_infer(blocks)


def _margin_sides(problem: AggregationProblem, x_near: Array, x_far: Array,
                  delta: float) -> list[HypothesisSide]:
    sides = []
    for piece, mp in zip(problem.pieces, problem.maps):
        cut = margin_halfspace_cut(piece, problem.seminorm, x_near, x_far,
                                   delta)
        if not cut.is_empty():
            sides.append(HypothesisSide(mp, cut, validate=False))
    return sides


def _goodness_check(problem: AggregationProblem, i: int, j: int, delta: float,
                    tol: float) -> EuclidPairTest | None:
    reds = _margin_sides(problem, problem.points[i], problem.points[j], delta)
    blues = _margin_sides(problem, problem.points[j], problem.points[i], delta)
    if not reds or not blues:
        return EuclidPairTest(i, j, delta, None,
                              empty_red=not reds, empty_blue=not blues)
    test = build_color_test(problem.scheme,
                            ColorProblem(blues, reds, problem.k), tol=tol)
    n = problem.n_candidates
    level = problem.eps / (n * (n - 1) / 2.0)
    if test.eps_k <= level:
        return EuclidPairTest(i, j, delta, test)
    return None


def goodness_bisect_euclid(problem: AggregationProblem, i: int, j: int,
                           tol: float = 1e-9):
    """Smallest good margin for the pair, to resolution delta_floor.

    Returns (Delta_ij, test) with Delta_ij good and either Delta_ij <=
    delta_floor or Delta_ij - delta_floor not good.
    """
    if not problem.seminorm.is_euclidean:
        raise DomainViolation("the margin route needs a Euclidean seminorm")
    floor = problem.delta_floor
    r_ij = problem.pair_radius(i, j)
    lo = 0.0
    lo_test = _goodness_check(problem, i, j, lo, tol)
    if lo_test is not None:
        return lo, lo_test
    # the supporting-halfspace pieces can stay nonempty past 2 r_ij, so the
    # upper bracket grows until the margin hypotheses vacate the pieces
    hi = 2.0 * r_ij + floor
    hi_test = _goodness_check(problem, i, j, hi, tol)
    grow = 0
    while hi_test is None:
        lo, hi = hi, 2.0 * hi
        hi_test = _goodness_check(problem, i, j, hi, tol)
        grow += 1
        if grow > 60:
            raise DomainViolation("no good margin found for the pair")
    while hi - lo > floor:
        mid = 0.5 * (lo + hi)
        cand = _goodness_check(problem, i, j, mid, tol)
        if cand is not None:
            hi, hi_test = mid, cand
        else:
            lo = mid
    return hi, hi_test


def build_euclid_setup(problem: AggregationProblem, tol: float = 1e-9):
    """Margins and tests for all unordered pairs (Euclidean route)."""
    n = problem.n_candidates
    delta = np.zeros((n, n))
    tests: dict = {}
    for i in range(n):
        for j in range(i + 1, n):
            d, test = goodness_bisect_euclid(problem, i, j, tol=tol)
            delta[i, j] = delta[j, i] = d
            tests[(i, j)] = test
    return delta, tests


# ---------------------------------------------------------------------------
# batched Euclidean route (Gaussian scheme, ball pieces, linear maps)


@dataclass
class FastEuclidPairTest:
    """Batched counterpart of EuclidPairTest: detector grids plus shifts."""

    i: int
    j: int
    delta: float
    weights: Array | None    # (b, r, m) blue-vs-red detector coefficients
    const: Array | None      # (b, r)
    alpha: Array | None      # (b, r)
    k: int = 1
    eps_k: float = 0.0
    empty_red: bool = False
    empty_blue: bool = False

    @property
    def color_test(self):  # mirror EuclidPairTest's degenerate-flag protocol
        return None if self.weights is None else self

    def _blue(self, obs) -> bool:
        s = np.asarray(obs, dtype=float).sum(axis=0)
        stat = self.weights @ s + self.const * self.k
        return bool(np.any(np.all(stat - self.alpha >= 0.0, axis=1)))

    def rejects_near_i(self, obs) -> bool:
        if self.weights is None:
            return self.empty_red and not self.empty_blue
        return self._blue(obs)

    def rejects_near_j(self, obs) -> bool:
        if self.weights is None:
            return self.empty_blue and not self.empty_red
        return not self._blue(obs)

    def rejects_near_i_batch(self, blocks) -> Array:
        blocks = np.asarray(blocks, dtype=float)
        if self.weights is None:
            return np.full(blocks.shape[0], self.empty_red and not self.empty_blue)
        s = blocks.sum(axis=1)  # (n, m)
        stat = np.einsum("brm,nm->nbr", self.weights, s) + self.const * self.k
        return np.any(np.all(stat - self.alpha >= 0.0, axis=2), axis=1)


def fast_euclid_applicable(problem: AggregationProblem) -> bool:
    from .geometry.sets import Ball
    return (problem.scheme.family == "gaussian"
            and problem.seminorm.kind == Seminorm.L2
            and all(isinstance(p, Ball) for p in problem.pieces)
            and all(float(np.max(np.abs(m.offset), initial=0.0)) == 0.0
                    for m in problem.maps))


def _fast_margin_rows(problem: AggregationProblem, i: int, j: int,
                      delta: float):
    """Nonempty blue/red piece descriptors for one pair at one margin.

    Pieces are the supporting-halfspace outer approximations (see
    margin_halfspace_cut): red near x_i in {psi.(Bz - mid) <= -delta/2},
    blue near x_j on the opposite side.
    """
    B = problem.seminorm.matrix
    w_i, w_j = B @ problem.points[i], B @ problem.points[j]
    gap = w_j - w_i
    psi = gap / float(np.linalg.norm(gap))
    mid = float(psi @ (0.5 * (w_i + w_j)))
    n_sig = B.T @ psi
    red, blue = [], []
    for nu, (piece, mp) in enumerate(zip(problem.pieces, problem.maps)):
        nn = float(np.linalg.norm(n_sig))
        lo = float(n_sig @ piece.center) - piece.radius * nn
        hi = float(n_sig @ piece.center) + piece.radius * nn
        if lo <= mid - 0.5 * delta:       # red piece nonempty
            red.append((nu, n_sig, mid - 0.5 * delta))
        if hi >= mid + 0.5 * delta:       # blue piece nonempty
            blue.append((nu, -n_sig, -(mid + 0.5 * delta)))
    return red, blue


def _fast_goodness_batch(problem: AggregationProblem,
                         items: list) -> list:
    """Goodness checks for a batch of (i, j, delta) items in one solve.

    Returns one FastEuclidPairTest (or None when the color-test risk exceeds
    the per-pair level) per item.
    """
    from .colors import perron_data
    from .fastpath import BallRows, GaussianPairBatch
    n = problem.n_candidates
    level = problem.eps / (n * (n - 1) / 2.0)
    prepared = []
    c1, r1, n1, o1, c2, r2, n2, o2, A1, A2 = ([] for _ in range(10))
    offsets = []
    cursor = 0
    for (i, j, delta) in items:
        red, blue = _fast_margin_rows(problem, i, j, delta)
        if not red or not blue:
            prepared.append(("degenerate", i, j, delta, not red, not blue))
            offsets.append(None)
            continue
        prepared.append(("solve", i, j, delta, blue, red))
        count = len(blue) * len(red)
        offsets.append((cursor, len(blue), len(red)))
        cursor += count
        for bl in blue:
            for re in red:
                c1.append(problem.pieces[bl[0]].center)
                r1.append(problem.pieces[bl[0]].radius)
                n1.append(bl[1]); o1.append(bl[2])
                A1.append(problem.maps[bl[0]].matrix)
                c2.append(problem.pieces[re[0]].center)
                r2.append(problem.pieces[re[0]].radius)
                n2.append(re[1]); o2.append(re[2])
                A2.append(problem.maps[re[0]].matrix)
    sol = None
    if cursor:
        ones = np.ones(cursor, dtype=bool)
        side1 = BallRows(np.stack(c1), np.array(r1), np.stack(n1),
                         np.array(o1), ones)
        side2 = BallRows(np.stack(c2), np.array(r2), np.stack(n2),
                         np.array(o2), ones.copy())
        sol = GaussianPairBatch(np.stack(A1), np.stack(A2), side1,
                                side2).solve()
    out = []
    for entry, off in zip(prepared, offsets):
        if entry[0] == "degenerate":
            _, i, j, delta, er, eb = entry
            out.append(FastEuclidPairTest(i, j, delta, None, None, None,
                                          k=problem.k, empty_red=er,
                                          empty_blue=eb))
            continue
        _, i, j, delta, blue, red = entry
        start, b, r = off
        sl = slice(start, start + b * r)
        E = (sol["eps"][sl] ** problem.k).reshape(b, r)
        eps_k, _, _, alpha = perron_data(np.maximum(E, 1e-12))
        if eps_k > level:
            out.append(None)
            continue
        m = sol["weights"].shape[1]
        out.append(FastEuclidPairTest(i, j, delta,
                                      sol["weights"][sl].reshape(b, r, m),
                                      sol["const"][sl].reshape(b, r), alpha,
                                      k=problem.k, eps_k=eps_k))
    return out


def _fast_goodness_check(problem: AggregationProblem, i: int, j: int,
                         delta: float) -> FastEuclidPairTest | None:
    return _fast_goodness_batch(problem, [(i, j, delta)])[0]


def fast_euclid_setup(problem: AggregationProblem):
    """Batched-margin version of build_euclid_setup (same contract).

    All pairs bisect in lockstep so every round runs one stacked solve over
    the active pairs' piece combinations.
    """
    if not fast_euclid_applicable(problem):
        raise DomainViolation("fast Euclidean setup needs Gaussian + balls")
    n = problem.n_candidates
    floor = problem.delta_floor
    delta = np.zeros((n, n))
    tests: dict = {}
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    res0 = _fast_goodness_batch(problem, [(i, j, 0.0) for i, j in pairs])
    state: dict = {}
    for (i, j), t0 in zip(pairs, res0):
        if t0 is not None:
            tests[(i, j)] = t0
        else:
            state[(i, j)] = [0.0, 2.0 * problem.pair_radius(i, j) + floor,
                             None]
    # grow upper brackets until good
    for _ in range(60):
        pending = [(i, j) for (i, j) in state if state[(i, j)][2] is None]
        if not pending:
            break
        res = _fast_goodness_batch(problem,
                                   [(i, j, state[(i, j)][1])
                                    for i, j in pending])
        for (i, j), t in zip(pending, res):
            if t is not None:
                state[(i, j)][2] = t
            else:
                state[(i, j)][0] = state[(i, j)][1]
                state[(i, j)][1] *= 2.0
    if any(state[k][2] is None for k in state):
        raise DomainViolation("no good margin found for some pair")
    # lockstep bisection
    while True:
        active = [(i, j) for (i, j) in state
                  if state[(i, j)][1] - state[(i, j)][0] > floor]
        if not active:
            break
        mids = [0.5 * (state[(i, j)][0] + state[(i, j)][1])
                for i, j in active]
        res = _fast_goodness_batch(problem,
                                   [(i, j, m) for (i, j), m in
                                    zip(active, mids)])
        for (i, j), m, t in zip(active, mids, res):
            if t is not None:
                state[(i, j)][1] = m
                state[(i, j)][2] = t
            else:
                state[(i, j)][0] = m
    for (i, j), (lo, hi, t) in state.items():
        tests[(i, j)] = t
    for (i, j), t in tests.items():
        delta[i, j] = delta[j, i] = t.delta
    return delta, tests


def aggregate_euclid(problem: AggregationProblem, delta: Array, tests: dict,
                     obs, truth: Array | None = None) -> AggregationOutcome:
    """Score-based aggregation: the candidate losing fewest margin tests wins.

    A pair with both margin hypotheses empty contributes to neither score;
    with ``truth`` supplied the report evaluates
    ||x_i* - truth|| + 2 max_{i != j} Delta_ij.
    """
    n = problem.n_candidates
    scores = np.zeros(n, dtype=int)
    for i in range(n):
        for j in range(i + 1, n):
            test = tests[(i, j)]
            if test.color_test is None and test.empty_red and test.empty_blue:
                continue  # both hypotheses empty: accept both
            if test.rejects_near_i(obs):
                scores[i] += 1
            if test.rejects_near_j(obs):
                scores[j] += 1
    chosen = int(np.argmin(scores))
    report: dict = {}
    if truth is not None:
        truth = np.asarray(truth, dtype=float)
        dist = [problem.seminorm.eval(p - truth) for p in problem.points]
        i_star = int(np.argmin(dist))
        off = delta[~np.eye(n, dtype=bool)]
        report["i_star"] = i_star
        report["delta_bar"] = float(np.max(off)) if off.size else 0.0
        report["guarantee_rhs"] = dist[i_star] + 2.0 * report["delta_bar"]
        report["error"] = problem.seminorm.eval(problem.points[chosen] - truth)
    return AggregationOutcome(chosen, problem.points[chosen].copy(),
                              admissible=[int(a) for a in
                                          np.flatnonzero(scores == scores.min())],
                              scores=scores, bound_report=report)


def required_K_theorems(eps: float, kbar: int, n: int, j: int,
                        which: str) -> int:
    """Observation budgets under which the aggregation guarantees activate."""
    if not 0.0 < eps < 0.5:
        raise DomainViolation("eps must lie in (0, 1/2)")
    if kbar < 1 or n < 2 or j < 1:
        raise DomainViolation("kbar >= 1, n >= 2, j >= 1 required")
    if which == GENL_5_1:
        num = 2.0 * math.log(j * (n - 1) / eps)
    elif which == EUCL_5_2:
        num = 2.0 * math.log(j * (n * (n - 1) / 2.0) / eps)
    elif which == PROP_5_3:
        num = 2.0 * math.log(n * (n - 1) / eps)
    elif which == PROP_5_4:
        num = 2.0 * math.log(n * n * (n - 1) / (2.0 * eps))
    else:
        raise DomainViolation(f"unknown budget variant {which!r}")
    denom = math.log(1.0 / (4.0 * eps * (1.0 - eps)))
    return int(math.ceil(num / denom * kbar))
