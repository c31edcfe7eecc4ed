"""Adaptive estimation over unions of convex sets.

Two-stage scheme: a pilot pass produces per-model points with certified risk
radii; the second-stage observations drive pairwise detector tests that pick
the model/point to report.  Two selection routines are provided:

* ``general_adaptive`` (any seminorm): hypotheses are the pilot-radius balls
  B_i = X_i intersected with {||x - x_i|| <= r_i}; a pair is K-good when its
  detector test meets the per-pair budget eps/(N-1); the smallest index never
  rejected wins.
* ``euclid_adaptive`` (Euclidean seminorm): hypotheses live in the image
  space of the seminorm matrix; quadruple tests split each candidate pair's
  midpoint hyperplane with a bisected margin, and the routine returns both
  the selected point and the midpoint aggregate of the two most distant
  admissible candidates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import sep_risk_affinity_upper
from .detectors import (ACCEPT_1, AffineMap, DetectorResult, EmptySideOutcome,
                        HypothesisSide, run_test, solve_pair)
from .errors import (AllHypothesesEmpty, DegeneratePoints, DimensionMismatch,
                     DomainViolation)
from .fastpath import BallRows, GaussianPairBatch, detector_statistics
from .geometry.distance import min_seminorm_distance
from .geometry.seminorms import Seminorm
from .geometry.sets import Ball, ConvexCompactSet, HalfspaceCut, SeminormBallCut
from .schemes import GAUSSIAN, SchemeSpec, validate_obs
from .solvers import fista

Array = np.ndarray


@dataclass
class UnionModel:
    """Union-of-models problem data: sets, maps, seminorm, budgets."""

    scheme: SchemeSpec
    sets: list
    maps: list
    seminorm: Seminorm
    eps: float
    kbar: int
    k: int

    def __post_init__(self):
        if len(self.sets) < 2 or len(self.sets) != len(self.maps):
            raise DimensionMismatch("need N >= 2 sets with matching maps")
        if not 0.0 < self.eps < 0.5:
            raise DomainViolation("eps must lie in (0, 1/2)")
        if self.kbar < 1 or self.k < 1:
            raise DomainViolation("kbar and k must be positive integers")

    @property
    def n_models(self) -> int:
        return len(self.sets)

    def check_domains(self) -> None:
        for st, mp in zip(self.sets, self.maps):
            HypothesisSide(mp, st, scheme=self.scheme.base(), validate=True)


@dataclass
class PilotEstimates:
    """Per-model pilot points with certified risk radii."""

    points: Array            # (N, n)
    radii: Array             # (N,)
    theta: float | None = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.radii = np.asarray(self.radii, dtype=float)
        if self.radii.shape != (self.points.shape[0],):
            raise DimensionMismatch("one radius per pilot point required")
        if not np.all(np.isfinite(self.radii)) or np.any(self.radii < 0):
            raise DomainViolation("pilot radii must be finite and nonnegative")


@dataclass
class AdaptiveOutcome:
    """Selected index/point plus the audit trail and bound report."""

    chosen_index: int
    estimate: Array
    admissible: list
    bound_report: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# pilot machinery


def constrained_least_squares(A: Array, target: Array, set_: ConvexCompactSet,
                              offset: Array | None = None,
                              tol: float = 1e-10, max_iter: int = 4000) -> Array:
    """argmin over the set of ||A x + offset - target||_2."""
    b = target if offset is None else target - offset
    Atb = A.T @ b
    G = A.T @ A
    L = 2.0 * float(np.linalg.norm(G, 2)) + 1e-300

    def fun(x):
        r = A @ x - b
        return float(r @ r)

    def grad(x):
        return 2.0 * (G @ x - Atb)

    x0 = set_.anchor_point()
    x, _ = fista(grad, lambda p: set_.project(p, tol=1e-9), x0, L, fun,
                 tol=tol, max_iter=max_iter)
    return x


def _ball_cls_batch(A: Array, targets: Array, center: Array,
                    radius: float) -> Array:
    """Batched min ||A x - t|| over a ball: ridge path by Newton on the radius."""
    G = A.T @ A
    d, V = np.linalg.eigh(G)
    d = np.maximum(d, 0.0)
    rhs = targets @ A  # (S, n)
    z = (rhs - (G @ center) [None, :]) @ V  # shifted coordinates
    # solve ||x(lam) - c|| = radius with x(lam) = c + V (z / (d + lam))
    out = np.empty((targets.shape[0], A.shape[1]))
    for s in range(targets.shape[0]):
        zs = z[s]
        lam = 0.0
        if d[0] > 0:
            w = zs / d
            if float(w @ w) <= radius * radius:
                out[s] = center + V @ w
                continue
        lam = max(float(np.linalg.norm(zs)) / max(radius, 1e-12) - d[0], 1e-12)
        for _ in range(100):
            w = zs / (d + lam)
            f = float(w @ w) - radius * radius
            if abs(f) <= 1e-14 * radius * radius:
                break
            df = -2.0 * float(np.sum(zs * zs / (d + lam) ** 3))
            lam_new = lam - f / df
            lam = lam_new if lam_new > 0 else 0.5 * lam
        out[s] = center + V @ (zs / (d + lam))
    return out


def gaussian_pilot_points(model: UnionModel, pilot_obs: Array) -> Array:
    """Default pilot: constrained least squares from the averaged block."""
    if model.scheme.family != GAUSSIAN:
        raise DomainViolation("the default pilot assumes the Gaussian scheme")
    block = validate_obs(model.scheme.base(), pilot_obs, k=model.kbar)
    w_hat = block.mean(axis=0)
    pts = [constrained_least_squares(mp.matrix, w_hat, st, offset=mp.offset)
           for st, mp in zip(model.sets, model.maps)]
    return np.stack(pts)


def calibrate_pilot_radii(model: UnionModel, rng: np.random.Generator,
                          n_samples: int = 2000, inflate: float = 1.1) -> Array:
    """Monte-Carlo radii: per model, the (1-eps)-quantile of the pilot error
    over sampled signals, inflated by ``inflate``."""
    if model.scheme.family != GAUSSIAN:
        raise DomainViolation("radius calibration assumes the Gaussian scheme")
    m = model.scheme.dim
    radii = np.empty(model.n_models)
    for i, (st, mp) in enumerate(zip(model.sets, model.maps)):
        xs = st.sample(rng, n_samples)
        noise = rng.standard_normal((n_samples, m)) / math.sqrt(model.kbar)
        targets = xs @ mp.matrix.T + mp.offset + noise
        if isinstance(st, Ball):
            est = _ball_cls_batch(mp.matrix, targets - mp.offset, st.center,
                                  st.radius)
        else:
            est = np.stack([constrained_least_squares(mp.matrix, t, st,
                                                      offset=mp.offset)
                            for t in targets])
        errs = np.array([model.seminorm.eval(e - x) for e, x in zip(est, xs)])
        radii[i] = float(np.quantile(errs, 1.0 - model.eps)) * inflate
    return radii


# ---------------------------------------------------------------------------
# general-seminorm selection


def pilot_hypothesis_sets(model: UnionModel, pilot: PilotEstimates):
    """B_i = X_i intersected with the pilot-radius seminorm ball."""
    return [SeminormBallCut(st, model.seminorm, pilot.points[i],
                            pilot.radii[i])
            for i, st in enumerate(model.sets)]


def general_adaptive(model: UnionModel, pilot: PilotEstimates, obs,
                     tol: float = 1e-9, sep_upper: Array | None = None,
                     compute_delta_bounds: bool = False) -> AdaptiveOutcome:
    """Select the smallest-index hypothesis never rejected by a K-good test.

    ``sep_upper`` (optional, (N, N)) carries precomputed upper bounds on the
    pairwise separation risks at level eps/(N-1) and feeds the theorem-style
    bound report; ``compute_delta_bounds`` additionally evaluates the
    realized bound from the pilot-ball separations of K-bad pairs.
    """
    n = model.n_models
    cuts = pilot_hypothesis_sets(model, pilot)
    survivors = [i for i in range(n) if not cuts[i].is_empty()]
    if not survivors:
        raise AllHypothesesEmpty("every pilot hypothesis ball is empty")
    info: dict = {"survivors": survivors,
                  "pruned": [i for i in range(n) if i not in survivors]}
    if len(survivors) == 1:
        i = survivors[0]
        return AdaptiveOutcome(i, pilot.points[i].copy(), [i], {}, info)
    level = model.eps / (len(survivors) - 1)
    info["level"] = level
    sides = {i: HypothesisSide(model.maps[i], cuts[i], validate=False)
             for i in survivors}
    block = validate_obs(model.scheme.base(), obs, k=model.k)

    good: dict = {}
    eps_mat: dict = {}
    rejected = {i: False for i in survivors}
    for a in range(len(survivors)):
        for b in range(a + 1, len(survivors)):
            i, j = survivors[a], survivors[b]
            det = solve_pair(model.scheme.base(), sides[i], sides[j], tol=tol)
            if isinstance(det, EmptySideOutcome):
                continue
            eps_mat[(i, j)] = det.eps_star
            if det.eps_star ** model.k <= level:
                good[(i, j)] = det
                if run_test(det, model.k, block) == ACCEPT_1:
                    rejected[j] = True
                else:
                    rejected[i] = True
    admissible = [i for i in survivors if not rejected[i]]
    chosen = min(admissible) if admissible else survivors[0]
    info["good_pairs"] = sorted(good.keys())
    info["eps_pairs"] = {f"{i},{j}": e for (i, j), e in eps_mat.items()}

    report: dict = {}
    if compute_delta_bounds:
        delta: dict = {}
        for (i, j), e in eps_mat.items():
            if (i, j) in good:
                continue
            v, _, _ = min_seminorm_distance(cuts[i], cuts[j], model.seminorm,
                                            tol=1e-6)
            delta[(i, j)] = 0.5 * v
        rhs = {}
        for i in survivors:
            worst = 0.0
            for j in survivors:
                if j < i and (min(i, j), max(i, j)) in delta:
                    d = delta[(min(i, j), max(i, j))]
                    worst = max(worst, pilot.radii[j] + 2.0 * d)
            rhs[i] = 2.0 * pilot.radii[i] + worst
        report["delta_rhs"] = rhs
    if sep_upper is not None:
        rhs_t = {}
        for i in range(n):
            worst = max((pilot.radii[j] + 2.0 * sep_upper[i, j]
                         for j in range(i)), default=0.0)
            rhs_t[i] = 2.0 * pilot.radii[i] + worst
        report["theorem_rhs"] = rhs_t
    return AdaptiveOutcome(chosen, pilot.points[chosen].copy(), admissible,
                           report, info)


def separation_upper_matrix(model: UnionModel, level: float,
                            rng: np.random.Generator | None = None) -> Array:
    """Pairwise separation-risk upper bounds at the given per-pair level."""
    n = model.n_models
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            res = sep_risk_affinity_upper(model.scheme, model.sets[i],
                                          model.sets[j], model.maps[i],
                                          model.maps[j], model.seminorm,
                                          level, model.k, rng=rng)
            out[i, j] = res["upper"]
    return out


# ---------------------------------------------------------------------------
# Euclidean-seminorm aggregation with quadruple tests


@dataclass
class _QuadData:
    """Per-quadruple geometry and bisection state."""

    i: int
    j: int
    l_minus: int
    l_plus: int
    r_ij: float
    normal: Array       # halfspace normal in signal space (B^T psi)
    mid_level: float    # psi . w_mid
    minus_empty: bool = False
    delta: float = 0.0
    good: bool = False
    plus_empty_at_delta: bool = False
    weights: Array | None = None
    const: float | None = None
    detector: DetectorResult | None = None


def _euclid_rows(model: UnionModel, cand: list[int], w: Array):
    rows: list[_QuadData] = []
    for i in cand:
        for j in cand:
            if i == j:
                continue
            gap = w[j] - w[i]
            norm = float(np.linalg.norm(gap))
            psi = gap / norm
            mid = float(psi @ (0.5 * (w[i] + w[j])))
            normal = model.seminorm.matrix.T @ psi
            for l_minus in range(model.n_models):
                for l_plus in range(model.n_models):
                    rows.append(_QuadData(i, j, l_minus, l_plus, 0.5 * norm,
                                          normal, mid))
    return rows


def _fastpath_applicable(model: UnionModel) -> bool:
    return (model.scheme.family == GAUSSIAN
            and all(isinstance(st, Ball) for st in model.sets)
            and all(float(np.max(np.abs(mp.offset), initial=0.0)) == 0.0
                    for mp in model.maps))


def _probe_quadruples_fast(model: UnionModel, rows: list[_QuadData],
                           deltas: Array, active: list[int]) -> list:
    """Batched goodness probe; returns per-row (good, eps, det data or None)."""
    centers1, radii1, normals1, offs1 = [], [], [], []
    centers2, radii2, normals2, offs2 = [], [], [], []
    A1, A2 = [], []
    for idx, q in zip(active, deltas):
        row = rows[idx]
        s1, s2 = model.sets[row.l_minus], model.sets[row.l_plus]
        centers1.append(s1.center); radii1.append(s1.radius)
        centers2.append(s2.center); radii2.append(s2.radius)
        normals1.append(row.normal); offs1.append(row.mid_level)
        normals2.append(-row.normal); offs2.append(-(row.mid_level + q))
        A1.append(model.maps[row.l_minus].matrix)
        A2.append(model.maps[row.l_plus].matrix)
    ones = np.ones(len(active), dtype=bool)
    side1 = BallRows(np.stack(centers1), np.array(radii1), np.stack(normals1),
                     np.array(offs1), ones.copy())
    side2 = BallRows(np.stack(centers2), np.array(radii2), np.stack(normals2),
                     np.array(offs2), ones.copy())
    empty1 = side1.empty_mask()
    empty2 = side2.empty_mask()
    solve_mask = ~(empty1 | empty2)
    out = [None] * len(active)
    if np.any(solve_mask):
        sub = np.flatnonzero(solve_mask)
        batch = GaussianPairBatch(
            np.stack([A1[s] for s in sub]), np.stack([A2[s] for s in sub]),
            BallRows(side1.center[sub], side1.radius[sub], side1.normal[sub],
                     side1.offset[sub], ones[sub]),
            BallRows(side2.center[sub], side2.radius[sub], side2.normal[sub],
                     side2.offset[sub], ones[sub]))
        sol = batch.solve()
        for pos, s in enumerate(sub):
            out[s] = {"eps": float(sol["eps"][pos]),
                      "weights": sol["weights"][pos],
                      "const": float(sol["const"][pos])}
    result = []
    for s in range(len(active)):
        if empty1[s] or empty2[s]:
            result.append({"empty_minus": bool(empty1[s]),
                           "empty_plus": bool(empty2[s]), "eps": 0.0})
        else:
            r = out[s]
            r["empty_minus"] = r["empty_plus"] = False
            result.append(r)
    return result


def _probe_quadruples_reference(model: UnionModel, rows: list[_QuadData],
                                deltas: Array, active: list[int],
                                tol: float) -> list:
    result = []
    base = model.scheme.base()
    for idx, q in zip(active, deltas):
        row = rows[idx]
        minus = HalfspaceCut(model.sets[row.l_minus], row.normal, row.mid_level)
        plus = HalfspaceCut(model.sets[row.l_plus], -row.normal,
                            -(row.mid_level + q))
        e1, e2 = minus.is_empty(), plus.is_empty()
        if e1 or e2:
            result.append({"empty_minus": e1, "empty_plus": e2, "eps": 0.0})
            continue
        det = solve_pair(base,
                         HypothesisSide(model.maps[row.l_minus], minus,
                                        validate=False),
                         HypothesisSide(model.maps[row.l_plus], plus,
                                        validate=False), tol=tol)
        if isinstance(det, EmptySideOutcome):
            result.append({"empty_minus": det.side1_empty,
                           "empty_plus": det.side2_empty, "eps": 0.0})
        else:
            result.append({"eps": det.eps_star, "detector": det,
                           "empty_minus": False, "empty_plus": False})
    return result


def euclid_adaptive(model: UnionModel, pilot: PilotEstimates, obs,
                    delta_floor: float | None = None, tol: float = 1e-9,
                    sep_upper: Array | None = None):
    """Quadruple-test aggregation for a Euclidean seminorm.

    Returns (selected, midpoint) outcomes: the selected pilot point x_hat and
    the midpoint x_tilde of the two admissible candidates whose seminorm
    images are farthest apart.
    """
    if model.seminorm.kind != Seminorm.L2:
        raise DomainViolation("euclid_adaptive needs a Euclidean seminorm")
    n = model.n_models
    B = model.seminorm.matrix
    w = pilot.points @ B.T
    scale = 1.0 + float(np.max(np.abs(w)))
    cand: list[int] = []
    merges: dict[int, int] = {}
    for i in range(n):
        dup = next((c for c in cand
                    if np.linalg.norm(w[i] - w[c]) < 1e-9 * scale), None)
        if dup is None:
            cand.append(i)
        else:
            merges[i] = dup
    if len(cand) < 2:
        raise DegeneratePoints("all pilot points coincide in the seminorm")
    n_bar = 2.0 * len(cand) * (len(cand) - 1)
    level = model.eps / n_bar
    rows = _euclid_rows(model, cand, w)
    if delta_floor is None:
        delta_floor = 1e-4 * max(r.r_ij for r in rows)

    fast = _fastpath_applicable(model)

    def probe(idx_list, deltas):
        if fast:
            return _probe_quadruples_fast(model, rows, deltas, idx_list)
        return _probe_quadruples_reference(model, rows, deltas, idx_list, tol)

    def record(row: _QuadData, res: dict, delta: float, good: bool):
        row.delta = delta
        row.good = good
        row.plus_empty_at_delta = res.get("empty_plus", False)
        row.minus_empty = res.get("empty_minus", False)
        row.weights = res.get("weights")
        row.const = res.get("const")
        row.detector = res.get("detector")

    # initial probe at delta = r_ij decides badness
    all_idx = list(range(len(rows)))
    res0 = probe(all_idx, np.array([rows[i].r_ij for i in all_idx]))
    states = []
    for idx, res in zip(all_idx, res0):
        row = rows[idx]
        is_good = (res["empty_minus"] or res["empty_plus"]
                   or res["eps"] ** model.k <= level)
        if is_good:
            record(row, res, row.r_ij, True)
            states.append([idx, 0.0, row.r_ij])
        else:
            record(row, res, row.r_ij, False)  # bad quadruple
    # lockstep bisection on the good rows
    while states:
        active, deltas = [], []
        next_states = []
        for idx, lo, hi in states:
            if hi - lo <= delta_floor:
                continue
            active.append(idx)
            deltas.append(0.5 * (lo + hi))
            next_states.append([idx, lo, hi])
        if not active:
            break
        res_mid = probe(active, np.array(deltas))
        states = []
        for (idx, lo, hi), mid, res in zip(next_states, deltas, res_mid):
            row = rows[idx]
            is_good = (res["empty_minus"] or res["empty_plus"]
                       or res["eps"] ** model.k <= level)
            if is_good:
                record(row, res, mid, True)
                states.append([idx, lo, mid])
            else:
                states.append([idx, mid, hi])

    # decision pass
    block = validate_obs(model.scheme.base(), obs, k=model.k)
    obs_f = np.asarray(block, dtype=float)
    rejected: dict[tuple[int, int], bool] = {}
    for row in rows:
        key = (row.i, row.l_minus)
        rejected.setdefault(key, False)
        if not row.good:
            continue  # bad quadruple: the margin alternative is rejected
        if row.minus_empty:
            if not row.plus_empty_at_delta:
                rejected[key] = True
            continue
        if row.plus_empty_at_delta:
            continue
        if row.detector is not None:
            accept_minus = run_test(row.detector, model.k, block) == ACCEPT_1
        else:
            stat = float(obs_f.sum(axis=0) @ row.weights
                         + row.const * model.k)
            accept_minus = stat >= 0.0
        if not accept_minus:
            rejected[key] = True

    admissible = sorted(k for k, r in rejected.items() if not r)
    info = {"candidates": cand, "merges": merges, "level": level,
            "delta_floor": delta_floor,
            "deltas": {(r.i, r.j, r.l_minus, r.l_plus): r.delta for r in rows},
            "admissible_pairs": admissible}
    if admissible:
        l_min = min(l for _, l in admissible)
        i_hat = min(i for i, l in admissible if l == l_min)
    else:
        i_hat = cand[0]
    x_hat = pilot.points[i_hat].copy()

    adm_is = sorted({i for i, _ in admissible}) or [cand[0]]
    best_pair = (adm_is[0], adm_is[0])
    best_len = -1.0
    for a in adm_is:
        for b in adm_is:
            d = float(np.linalg.norm(w[a] - w[b]))
            if d > best_len:
                best_len, best_pair = d, (a, b)
    x_tilde = 0.5 * (pilot.points[best_pair[0]] + pilot.points[best_pair[1]])

    report: dict = {}
    if sep_upper is not None:
        rhs_hat, rhs_tilde = {}, {}
        for i in range(n):
            m_lt = max((sep_upper[i, j] for j in range(i)), default=0.0)
            m_ne = max((sep_upper[i, j] for j in range(n) if j != i),
                       default=0.0)
            rhs_hat[i] = pilot.radii[i] + 2.0 * (m_lt + delta_floor)
            rhs_tilde[i] = math.sqrt(pilot.radii[i] ** 2
                                     + 4.0 * (m_ne + delta_floor) ** 2)
        report["selected_rhs"] = rhs_hat
        report["midpoint_rhs"] = rhs_tilde
    out_hat = AdaptiveOutcome(i_hat, x_hat, admissible, report, info)
    out_tilde = AdaptiveOutcome(best_pair[0], x_tilde,
                                [list(best_pair)], report,
                                {"pair": best_pair})
    return out_hat, out_tilde


def euclid_realized_bounds(model: UnionModel, pilot: PilotEstimates,
                           out_hat: AdaptiveOutcome, truth: Array,
                           ell_star: int) -> dict:
    """Per-realization guarantee right-hand sides, given the true signal.

    Evaluates the selected-point bound ||truth - x_i*|| + 2 max delta over
    admissible comparisons against the closest candidate, and the squared
    midpoint analogue.
    """
    deltas = out_hat.info["deltas"]
    admissible = out_hat.info["admissible_pairs"]
    dist = [model.seminorm.eval(p - truth) for p in pilot.points]
    i_star = int(np.argmin(dist))
    d_hat = 0.0
    d_tilde = 0.0
    for (j, l) in admissible:
        if j == i_star:
            continue
        key = (j, i_star, l, ell_star)
        if key in deltas:
            d_tilde = max(d_tilde, deltas[key])
            if l <= ell_star:
                d_hat = max(d_hat, deltas[key])
    return {"i_star": i_star,
            "selected_rhs": dist[i_star] + 2.0 * d_hat,
            "midpoint_rhs_sq": dist[i_star] ** 2 + 4.0 * d_tilde ** 2}
