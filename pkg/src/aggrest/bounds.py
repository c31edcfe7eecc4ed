"""Separation risks and their computable bounds.

The separation risk of a pair of signal sets is half the largest seminorm
distance between signals whose observation distributions remain statistically
hard to distinguish at a given level.  For the Gaussian scheme with linear
maps and ellitope data this is the maximum of a homogeneous quadratic form
over a product ellitope, upper-bounded by semidefinite relaxation (solved
here by a cutting-plane method with minimum-eigenvalue cuts); Monte-Carlo
search over feasible pairs supplies lower bounds; a norm/diameter argument
supplies a conservative upper bound where no relaxation applies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .detectors import AffineMap
from .errors import (DimensionMismatch, DomainViolation, Infeasible,
                     NoFeasibleSample, NonConvergence)
from .geometry.seminorms import Seminorm
from .geometry.sets import (Ball, ConvexCompactSet, Ellitope, MonotoneParamSet,
                            PNormCap, UnitBox)
from .normal import normal_cdf, normal_pdf, normal_quantile  # noqa: F401
from .schemes import GAUSSIAN, SchemeSpec, log_affinity

Array = np.ndarray

SDP_FACTOR_CAP = 2_000  # cutting-plane iterations before giving up
_DELTA_FLOOR_REL = 1e-8


class _BoxCap(MonotoneParamSet):
    """[0, cap] interval paramset; keeps tightly-capped constraints well scaled."""

    def __init__(self, cap: float):
        self.dim = 1
        self.cap = float(cap)

    def support(self, lam: Array) -> float:
        return self.cap * float(np.maximum(lam, 0.0).sum())

    def sum_cap(self) -> float:
        return self.cap


def gaussian_radius_from_eps(eps: float, k: int) -> float:
    """Image-space radius equivalent to the affinity constraint
    rho >= eps^(1/K): ||mu - nu||_2 <= sqrt(8 ln(1/eps) / K)."""
    if not 0.0 < eps < 1.0:
        raise DomainViolation("eps must lie in (0, 1)")
    return math.sqrt(8.0 * math.log(1.0 / eps) / k)


def gaussian_radius_from_delta(delta: float, k: int) -> float:
    """Image-space radius of the quantile form: (2 / sqrt(K)) q_N(1 - delta)."""
    if not 0.0 < delta < 0.5:
        raise DomainViolation("delta must lie in (0, 1/2)")
    return 2.0 / math.sqrt(k) * normal_quantile(1.0 - delta)


# ---------------------------------------------------------------------------
# quadratic-over-ellitope relaxation


@dataclass
class QuadOverEllitope:
    """max w^T C w over {w : exists t in the product paramset, w^T T_k w <= t_k}."""

    objective: Array            # symmetric C
    constraints: list           # list of (D, D) PSD matrices T_k
    blocks: list                # list of (MonotoneParamSet, index list)
    boost_idx: list | None = None  # constraint subset with PD sum, O(1) caps

    @property
    def size(self) -> int:
        return len(self.constraints)

    def support(self, lam: Array) -> float:
        total = 0.0
        for pset, idx in self.blocks:
            total += pset.support(lam[idx])
        return total


def _embed(mat: Array, rows: slice, total: int) -> Array:
    out = np.zeros((total, total))
    out[rows, rows] = mat
    return out


def _dual_ball_ellitope(s: Seminorm) -> Ellitope:
    """The conjugate-norm unit ball as an ellitope, when representable."""
    q = s.q_dim
    if s.kind == Seminorm.L2 or (s.kind == Seminorm.LP and s.p == 2.0):
        return Ellitope([np.eye(q)], UnitBox(1))
    if s.kind == Seminorm.ELLITOPIC_DUAL:
        return s.dual_ball
    if s.kind == Seminorm.LP:
        mats = [np.outer(e, e) for e in np.eye(q)]
        if s.p == 1.0:
            return Ellitope(mats, UnitBox(q))
        qq = s.p / (s.p - 1.0)
        if qq >= 2.0:
            return Ellitope(mats, PNormCap(q, qq))
    raise DomainViolation(
        "seminorm's conjugate unit ball is not representable as an ellitope")


def assemble_quad_problem(set_i: Ellitope, set_j: Ellitope, map_i: AffineMap,
                          map_j: AffineMap, s: Seminorm,
                          radius: float) -> QuadOverEllitope:
    """Stack [u; x; y] and encode objective u.B(x-y) plus all constraints."""
    for st in (set_i, set_j):
        if not isinstance(st, Ellitope):
            raise DomainViolation("SDP relaxation needs ellitope signal sets")
    for mp in (map_i, map_j):
        if float(np.max(np.abs(mp.offset), initial=0.0)) > 0.0:
            raise DomainViolation("SDP relaxation needs linear (offset-free) maps")
    dual = _dual_ball_ellitope(s)
    q, n_i, n_j = dual.dim, set_i.dim, set_j.dim
    if s.matrix.shape != (q, n_i) or n_i != n_j:
        raise DimensionMismatch("seminorm/sets dimensions inconsistent")
    D = q + n_i + n_j
    u_sl = slice(0, q)
    x_sl = slice(q, q + n_i)
    y_sl = slice(q + n_i, D)

    C = np.zeros((D, D))
    C[u_sl, x_sl] = 0.5 * s.matrix
    C[x_sl, u_sl] = 0.5 * s.matrix.T
    C[u_sl, y_sl] = -0.5 * s.matrix
    C[y_sl, u_sl] = -0.5 * s.matrix.T

    constraints: list[Array] = []
    blocks: list[tuple[MonotoneParamSet, list[int]]] = []
    boost_idx: list[int] = []
    idx = 0
    for ell, sl in ((dual, u_sl), (set_i, x_sl), (set_j, y_sl)):
        ids = []
        for R in ell.matrices:
            constraints.append(_embed(R, sl, D))
            ids.append(idx)
            idx += 1
        boost_idx.extend(ids)
        blocks.append((ell.paramset, ids))

    scale = 1.0 + set_i.outer_radius() + set_j.outer_radius()
    d_eff = max(radius, _DELTA_FLOOR_REL * scale)
    Ai, Aj = map_i.matrix, map_j.matrix
    Q = np.zeros((D, D))
    Q[x_sl, x_sl] = Ai.T @ Ai
    Q[x_sl, y_sl] = -Ai.T @ Aj
    Q[y_sl, x_sl] = -Aj.T @ Ai
    Q[y_sl, y_sl] = Aj.T @ Aj
    constraints.append(Q)
    blocks.append((_BoxCap(d_eff * d_eff), [idx]))
    return QuadOverEllitope(0.5 * (C + C.T), constraints, blocks, boost_idx)


def _linear_objective(problem: QuadOverEllitope) -> Array | None:
    """Cost vector when every paramset block has a linear support function."""
    c = np.zeros(problem.size)
    for pset, idx in problem.blocks:
        if isinstance(pset, UnitBox):
            c[idx] = 1.0
        elif isinstance(pset, _BoxCap):
            c[idx] = pset.cap
        else:
            return None
    return c


def _support_subgradient(pset: MonotoneParamSet, v: Array) -> Array:
    """A subgradient of the block support function at v >= 0."""
    v = np.maximum(v, 0.0)
    if isinstance(pset, UnitBox):
        return np.ones_like(v)
    if isinstance(pset, _BoxCap):
        return np.full_like(v, pset.cap)
    s = pset.p / 2.0
    if s <= 1.0 + 1e-12:  # support = max -> vertex subgradient
        g = np.zeros_like(v)
        g[int(np.argmax(v))] = 1.0
        return g
    q = s / (s - 1.0)
    nv = float(np.sum(v ** q) ** (1.0 / q))
    if nv <= 0.0:
        g = np.zeros_like(v)
        g[0] = 1.0
        return g
    return (v / nv) ** (q - 1.0)


def _master_solve(problem: QuadOverEllitope, cuts_G: list, cuts_h: list,
                  lam0: Array, phi_cuts: list | None = None) -> Array:
    """min support(lam) s.t. G lam >= h, lam >= 0.

    All-linear paramsets give one LP.  Nonlinear blocks (PNormCap) are
    handled by outer-approximating their convex support functions with
    subgradient cuts in an epigraph LP and refining until the master value
    stabilizes; the value stays a lower bound for the exact master.
    """
    m = problem.size
    G = np.asarray(cuts_G)
    h = np.asarray(cuts_h)
    c = _linear_objective(problem)
    if c is not None:
        res = linprog(c=c, A_ub=-G, b_ub=-h,
                      bounds=[(0, None)] * m, method="highs")
        if not res.success:
            raise NonConvergence(f"master LP failed: {res.message}")
        lam = np.maximum(res.x, 0.0)
        return lam, float(c @ lam)

    pn_blocks = [(pset, np.asarray(idx)) for pset, idx in problem.blocks
                 if not isinstance(pset, (UnitBox, _BoxCap))]
    lin_cost = np.zeros(m)
    for pset, idx in problem.blocks:
        if isinstance(pset, UnitBox):
            lin_cost[idx] = 1.0
        elif isinstance(pset, _BoxCap):
            lin_cost[idx] = pset.cap
    n_tau = len(pn_blocks)
    if phi_cuts is None:
        phi_cuts = [[] for _ in range(n_tau)]
    lam = np.maximum(lam0, 0.0)
    # seed each epigraph with a cut at the previous iterate
    for b, (pset, idx) in enumerate(pn_blocks):
        g = _support_subgradient(pset, lam[idx])
        phi_cuts[b].append((g, float(pset.support(lam[idx]) - g @ lam[idx])))

    prev = -np.inf
    for _ in range(25):
        n_var = m + n_tau
        cost = np.concatenate([lin_cost, np.ones(n_tau)])
        rows, rhs = [], []
        for r in range(G.shape[0]):
            row = np.zeros(n_var)
            row[:m] = -G[r]
            rows.append(row)
            rhs.append(-h[r])
        for b, (pset, idx) in enumerate(pn_blocks):
            for g, c0 in phi_cuts[b]:
                row = np.zeros(n_var)
                row[idx] = g
                row[m + b] = -1.0
                rows.append(row)
                rhs.append(-c0)
        res = linprog(c=cost, A_ub=np.asarray(rows), b_ub=np.asarray(rhs),
                      bounds=[(0, None)] * n_var, method="highs")
        if not res.success:
            raise NonConvergence(f"master LP failed: {res.message}")
        lam = np.maximum(res.x[:m], 0.0)
        val = float(res.fun)
        gap = 0.0
        for b, (pset, idx) in enumerate(pn_blocks):
            exact = pset.support(lam[idx])
            gap = max(gap, exact - float(res.x[m + b]))
            g = _support_subgradient(pset, lam[idx])
            phi_cuts[b].append((g, float(exact - g @ lam[idx])))
        if gap <= 1e-10 * (1.0 + abs(val)) or abs(val - prev) <= 1e-12 * (1.0 + abs(val)):
            break
        prev = val
    return lam, val


def solve_quad_relaxation(problem: QuadOverEllitope, rel_tol: float = 1e-6,
                          abs_tol: float | None = None):
    """Cutting-plane solution of min{ support(lam) : sum lam_k T_k >= C }.

    Returns (value, lam) with lam feasible (polished so the matrix inequality
    holds up to 1e-8 ||C||); value is a certified upper bound on the quadratic
    maximum.  The master problem lower-bounds the optimum, so the duality gap
    is monitored directly; ``abs_tol`` defaults to 1e-9 of the objective's
    natural scale (needed when the optimum itself is at tolerance scale).
    """
    C = problem.objective
    Ts = np.asarray(problem.constraints)
    m = len(Ts)
    gamma = float(np.linalg.eigvalsh(np.sum(Ts, axis=0))[0])
    if gamma <= 0.0:
        raise Infeasible("sum of constraint matrices is not positive definite")
    norm_c = float(np.linalg.norm(C, 2)) + 1e-300
    # polish boost: a designated constraint subset with PD sum and O(1) caps,
    # so feasibility repairs never pay an extreme cap
    caps = np.array([p.sum_cap() for p, idx in problem.blocks
                     for _ in idx])
    boost = np.ones(m)
    if problem.boost_idx:
        boost = np.zeros(m)
        boost[problem.boost_idx] = 1.0
    gamma_b = float(np.linalg.eigvalsh(
        np.einsum("k,kij->ij", boost, Ts))[0])
    if gamma_b <= 0.0:
        boost = np.ones(m)
        gamma_b = gamma
    if abs_tol is None:
        value_scale = norm_c * float(np.sum(caps[boost > 0])) / gamma_b
        abs_tol = 1e-9 * (1.0 + value_scale)

    def polish(lam: Array) -> tuple[Array, float]:
        S = np.einsum("k,kij->ij", lam, Ts) - C
        min_eig = float(np.linalg.eigvalsh(S)[0])
        if min_eig >= 0.0:
            return lam, min_eig
        t = 1.02 * (-min_eig) / gamma_b
        return lam + t * boost, min_eig

    cuts_G: list[Array] = []
    cuts_h: list[float] = []
    n_pn = sum(1 for pset, _ in problem.blocks
               if not isinstance(pset, (UnitBox, _BoxCap)))
    phi_cuts = [[] for _ in range(n_pn)] if n_pn else None
    lam = np.zeros(m)
    best_val = math.inf
    best_lam = None
    lower = 0.0

    def converged() -> bool:
        return best_val - lower <= rel_tol * max(best_val, 1e-12) + abs_tol

    for _ in range(SDP_FACTOR_CAP):
        lam_pol, min_eig = polish(lam)
        val = problem.support(lam_pol)
        if val < best_val:
            best_val, best_lam = val, lam_pol
        if converged() or (min_eig >= -1e-12 * norm_c and best_val - lower
                           <= rel_tol * max(best_val, 1e-12) + abs_tol):
            break
        S = np.einsum("k,kij->ij", lam, Ts) - C
        _, evecs = np.linalg.eigh(S)
        v = evecs[:, 0]
        cuts_G.append(np.einsum("i,kij,j->k", v, Ts, v))
        cuts_h.append(float(v @ C @ v))
        lam, lower = _master_solve(problem, cuts_G, cuts_h, lam, phi_cuts)
        # the master value lower-bounds the SDP optimum
        if converged():
            lam_pol, _ = polish(lam)
            val = problem.support(lam_pol)
            if val < best_val:
                best_val, best_lam = val, lam_pol
            break
    else:
        raise NonConvergence("cutting-plane relaxation hit its cut cap")
    S = np.einsum("k,kij->ij", best_lam, Ts) - C
    if float(np.linalg.eigvalsh(S)[0]) < -1e-8 * norm_c:
        raise NonConvergence("relaxation certificate failed the PSD check")
    return best_val, best_lam


def sdp_suboptimality_factor(problem_size: int) -> float:
    """Guaranteed tightness factor of the relaxation: 2 ln D + 2 sqrt(ln D) + 1."""
    ln_d = math.log(max(problem_size, 2))
    return 2.0 * ln_d + 2.0 * math.sqrt(ln_d) + 1.0


def sep_risk_upper_sdp(set_i: Ellitope, set_j: Ellitope, map_i: AffineMap,
                       map_j: AffineMap, s: Seminorm, radius: float,
                       rel_tol: float = 1e-6) -> float:
    """Upper bound on 0.5 max ||x - y|| s.t. ||A_i x - A_j y||_2 <= radius."""
    problem = assemble_quad_problem(set_i, set_j, map_i, map_j, s, radius)
    val, _ = solve_quad_relaxation(problem, rel_tol=rel_tol)
    return 0.5 * val


# ---------------------------------------------------------------------------
# Monte-Carlo lower bound


@dataclass
class MCLowerBound:
    value: float
    feasible_fraction: float
    flagged: bool  # True when no feasible sample was found

    def __float__(self):
        return self.value


def sep_risk_lower_mc(set_i: ConvexCompactSet, set_j: ConvexCompactSet,
                      map_i: AffineMap, map_j: AffineMap, s: Seminorm,
                      radius: float, samples: int,
                      rng: np.random.Generator,
                      polish_steps: int = 100) -> MCLowerBound:
    """Best feasible value of the separation objective found by sampling.

    Any feasible pair yields a valid lower bound; the best few samples are
    polished by projected ascent with feasibility backtracking.
    """
    if samples < 1:
        raise DomainViolation("samples must be >= 1")
    xs = set_i.sample(rng, samples)
    ys = set_j.sample(rng, samples)
    img = xs @ map_i.matrix.T + map_i.offset - ys @ map_j.matrix.T - map_j.offset
    feas = np.linalg.norm(img, axis=1) <= radius
    n_feas = int(np.sum(feas))
    if n_feas == 0:
        return MCLowerBound(0.0, 0.0, True)
    vals = np.array([s.eval(x - y) if ok else -np.inf
                     for x, y, ok in zip(xs, ys, feas)])
    order = np.argsort(vals)[::-1][:3]

    def feasible(x, y):
        return (float(np.linalg.norm(map_i.apply(x) - map_j.apply(y)))
                <= radius * (1.0 + 1e-12))

    best = float(np.max(vals))
    for idx in order:
        x, y = xs[idx].copy(), ys[idx].copy()
        step = 0.25 * (1.0 + s.eval(x - y))
        for _ in range(polish_steps):
            d = s.matrix @ (x - y)
            nd = float(np.linalg.norm(d))
            u = s.dual_project(d / max(nd, 1e-300))
            gx, gy = s.matrix.T @ u, -(s.matrix.T @ u)
            x_new = set_i.radial_feasible(x + step * gx)
            y_new = set_j.radial_feasible(y + step * gy)
            if feasible(x_new, y_new):
                if s.eval(x_new - y_new) > s.eval(x - y):
                    x, y = x_new, y_new
                    step *= 1.3
                    continue
            step *= 0.5
            if step < 1e-12:
                break
        if feasible(x, y):
            best = max(best, s.eval(x - y))
    return MCLowerBound(0.5 * best, n_feas / samples, False)


# ---------------------------------------------------------------------------
# general-scheme upper bounds and report assembly


def sep_risk_diameter_upper(set_i: ConvexCompactSet, set_j: ConvexCompactSet,
                            s: Seminorm) -> float:
    """Conservative bound: half the seminorm diameter of the pair."""
    r = set_i.outer_radius() + set_j.outer_radius()
    return 0.5 * s.dual_radius() * s.op_norm() * r


def sep_risk_affinity_upper(scheme: SchemeSpec, set_i: ConvexCompactSet,
                            set_j: ConvexCompactSet, map_i: AffineMap,
                            map_j: AffineMap, s: Seminorm, eps: float, k: int,
                            rng: np.random.Generator | None = None,
                            mc_samples: int = 2000) -> dict:
    """Upper bound on the separation risk at affinity level eps^(1/K).

    Gaussian data reduces to the image-radius form and, for ellitope data,
    the SDP relaxation; other schemes fall back to the diameter bound with a
    Monte-Carlo lower bound reported alongside the gap.
    """
    out: dict = {"eps": eps, "k": k, "scheme": scheme.family}
    if scheme.family == GAUSSIAN:
        radius = gaussian_radius_from_eps(eps, k)
        out["gaussian_radius"] = radius
        try:
            upper = sep_risk_upper_sdp(set_i, set_j, map_i, map_j, s, radius)
            out["method"] = "sdp"
        except (DomainViolation, DimensionMismatch):
            upper = sep_risk_diameter_upper(set_i, set_j, s)
            out["method"] = "diameter"
        out["upper"] = upper
        return out
    upper = sep_risk_diameter_upper(set_i, set_j, s)
    out["method"] = "diameter"
    out["upper"] = upper
    if rng is not None:
        target = eps ** (1.0 / k)
        lower = _affinity_lower_mc(scheme, set_i, set_j, map_i, map_j, s,
                                   target, mc_samples, rng)
        out["lower"] = lower
        out["gap"] = upper - lower
    return out


def _affinity_lower_mc(scheme, set_i, set_j, map_i, map_j, s, target_rho,
                       samples, rng) -> float:
    xs = set_i.sample(rng, samples)
    ys = set_j.sample(rng, samples)
    best = 0.0
    for x, y in zip(xs, ys):
        if math.exp(log_affinity(scheme.base(), map_i.apply(x),
                                 map_j.apply(y))) >= target_rho:
            best = max(best, s.eval(x - y))
    return 0.5 * best


def assemble_bound_reports(pilot_radii: Array, sep_bounds: Array, eps: float,
                           n_models: int, k: int, kbar: int) -> dict:
    """Aggregate pairwise separation bounds into risk-bound reports.

    sep_bounds[i, j] is an upper bound on the pairwise separation risk at the
    per-pair level eps/(N-1); pilot_radii[i] bounds the i-th pilot risk.
    """
    r = np.asarray(pilot_radii, dtype=float)
    g = np.asarray(sep_bounds, dtype=float)
    if g.shape != (n_models, n_models) or r.shape != (n_models,):
        raise DimensionMismatch("report inputs sized inconsistently")
    if not np.all(np.isfinite(r)) or not np.all(np.isfinite(g)):
        raise DomainViolation("report inputs must be finite")
    pair = 3.0 * np.maximum(r[:, None], r[None, :]) + 2.0 * g
    overall = float(np.max(3.0 * r[:, None] + 2.0 * g))
    eps_tilde = eps / max(n_models - 1, 1)
    theta_bar = (math.sqrt(k) * normal_quantile(1.0 - eps)
                 / (math.sqrt(kbar) * normal_quantile(1.0 - eps_tilde)))
    per_i = np.empty(n_models)
    surrogate = np.empty(n_models)
    for i in range(n_models):
        if i == 0:
            per_i[0] = 2.0 * r[0]
            surrogate[0] = 2.0 * r[0]
        else:
            js = np.arange(i)
            per_i[i] = 2.0 * r[i] + float(np.max(r[js] + 2.0 * g[i, js]))
            surrogate[i] = 2.0 * r[i] + float(
                np.max(r[js] + (pair[i, js] / theta_bar)))
    return {
        "pairwise": pair,
        "overall": overall,
        "theta_bar": theta_bar,
        "per_model_rhs": per_i,
        "per_model_rhs_surrogate": surrogate,
        "eps": eps,
        "eps_per_pair": eps_tilde,
        "k": k,
        "kbar": kbar,
    }
