"""Restricted quadratic minimization engines.

Every solver minimizes the same objective, 1 - 2 m'beta + beta' S beta, over
a restricted set of coefficient vectors. Supports are screened for positive
definiteness at tolerance 1e-10 relative to the matrix scale; singular
supports are skipped and counted, never silently used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from itertools import combinations

import numpy as np

from .errors import ConvergenceError, ExistenceError, SubsetBudgetError
from .rng import child_rng

CERT_EXHAUSTIVE = "exact_exhaustive"
CERT_LOCAL_OPT = "heuristic_local_opt"
CERT_FIXED_POINT = "fixed_point"
CERT_KKT = "convex_kkt"

_PD_TOL = 1e-10
_TIE_TOL = 1e-12
_OBJ_FLOOR = -1e12


@dataclass(frozen=True)
class SolverOptions:
    exhaustive_limit: int = 10**6
    max_iterations: int = 10**4
    convergence_tol: float = 1e-10
    swap_neighborhood: str = "single-swap"
    seed: int = 0
    restarts: int = 5

    def __post_init__(self):
        if self.exhaustive_limit < 1 or self.max_iterations < 1:
            raise ValueError("limits must be positive")
        if self.convergence_tol <= 0:
            raise ValueError("convergence_tol must be positive")
        if self.restarts < 0:
            raise ValueError("restarts must be nonnegative")


DEFAULT_OPTIONS = SolverOptions()


@dataclass(frozen=True)
class SolveOutcome:
    beta: np.ndarray
    objective: float
    certificate: str
    iterations: int
    skipped_supports: int = 0
    tie_count: int = 0

    @property
    def support(self) -> tuple:
        return tuple(int(j) for j in np.flatnonzero(self.beta))


def _as_matrix(s) -> np.ndarray:
    if hasattr(s, "matrix"):
        return np.asarray(s.matrix, dtype=float)
    return np.asarray(s, dtype=float)


def quad_objective(m, s, beta) -> float:
    m = np.asarray(m, dtype=float)
    beta = np.asarray(beta, dtype=float)
    return float(1.0 - 2.0 * m @ beta + beta @ _as_matrix(s) @ beta)


def subset_total(p: int, k: int) -> int:
    """Number of supports of size 1..k."""
    return sum(math.comb(p, i) for i in range(1, k + 1))


def _chol_if_pd(mat, scale):
    """Cholesky factor, or None when the block is singular at tolerance."""
    try:
        low = np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        return None
    if np.min(np.diag(low)) ** 2 < _PD_TOL * scale:
        return None
    return low


def bss_exhaustive(m, s, k, opts: SolverOptions | None = None, nonneg: bool = False) -> SolveOutcome:
    """Exact best-subset search over all supports of size <= k.

    Singular support blocks are skipped and counted; if every support is
    skipped an ExistenceError is raised. Ties at 1e-12 keep the first support
    in enumeration order (smallest size, then lexicographic) and are counted.
    """
    opts = opts or DEFAULT_OPTIONS
    m = np.asarray(m, dtype=float)
    smat = _as_matrix(s)
    p = len(m)
    k = min(k, p)
    total = subset_total(p, k)
    if total > opts.exhaustive_limit:
        raise SubsetBudgetError(
            f"{total} supports exceed the budget of {opts.exhaustive_limit}; "
            "use bss_heuristic instead"
        )
    scale = max(float(np.max(np.abs(smat))), np.finfo(float).tiny)
    best_obj = 1.0
    best_beta = np.zeros(p)
    ties = 0
    skipped = 0
    visited = 0
    for size in range(1, k + 1):
        for sup in combinations(range(p), size):
            idx = list(sup)
            block = smat[np.ix_(idx, idx)]
            low = _chol_if_pd(block, scale)
            if low is None:
                skipped += 1
                continue
            visited += 1
            if nonneg:
                beta_j, obj, witness = _nonneg_cd(m[idx], block, opts)
                if witness is not None:
                    skipped += 1
                    continue
            else:
                tmp = np.linalg.solve(low, m[idx])
                beta_j = np.linalg.solve(low.T, tmp)
                obj = 1.0 - float(m[idx] @ beta_j)
            if obj < best_obj - _TIE_TOL:
                best_obj = obj
                best_beta = np.zeros(p)
                best_beta[idx] = beta_j
                ties = 0
            elif obj <= best_obj + _TIE_TOL:
                ties += 1
    if visited == 0 and skipped > 0:
        raise ExistenceError("every candidate support was singular at tolerance")
    return SolveOutcome(
        beta=best_beta,
        objective=quad_objective(m, smat, best_beta),
        certificate=CERT_EXHAUSTIVE,
        iterations=visited,
        skipped_supports=skipped,
        tie_count=ties,
    )


def _stepwise_support(m, smat, k, scale):
    """Forward stepwise on q(J) = m_J' S_JJ^-1 m_J; returns the support list."""
    p = len(m)
    resid_d = np.diag(smat).astype(float).copy()
    resid_c = m.astype(float).copy()
    rows = []
    taken = np.zeros(p, dtype=bool)
    support = []
    for _ in range(min(k, p)):
        ok = (~taken) & (resid_d > _PD_TOL * scale)
        if not ok.any():
            break
        gains = np.where(ok, resid_c**2 / np.maximum(resid_d, np.finfo(float).tiny), -1.0)
        a = int(np.argmax(gains))
        raa = math.sqrt(resid_d[a])
        wrow = smat[a, :].astype(float).copy()
        for w in rows:
            wrow -= w[a] * w
        wrow /= raa
        cnew = resid_c[a] / raa
        resid_d = resid_d - wrow**2
        resid_c = resid_c - cnew * wrow
        rows.append(wrow)
        taken[a] = True
        support.append(a)
    return support


def _support_state(m, smat, idx, scale):
    """Inverse-based state for swap moves; None when the block is singular."""
    block = smat[np.ix_(idx, idx)]
    low = _chol_if_pd(block, scale)
    if low is None:
        return None
    inv = np.linalg.inv(block)
    beta = inv @ m[idx]
    q = float(m[idx] @ beta)
    return inv, beta, q


def _swap_descent(m, smat, support, opts, scale):
    """Single-swap local search; returns (objective, support, iterations) or None."""
    p = len(m)
    idx = sorted(int(j) for j in support)
    state = _support_state(m, smat, idx, scale)
    if state is None:
        return None
    moves = 0
    diag = np.diag(smat)
    while moves < opts.max_iterations:
        inv, beta, q = state
        out = np.array([j for j in range(p) if j not in idx], dtype=int)
        if out.size == 0:
            break
        v = smat[np.ix_(out, idx)]
        y = v @ inv
        alpha = m[out] - y @ m[idx]
        delta = diag[out] - np.einsum("ok,ok->o", y, v)
        best_gain = 0.0
        best_move = None
        for ai in range(len(idx)):
            haa = inv[ai, ai]
            if haa <= 0:
                continue
            q_minus = q - beta[ai] ** 2 / haa
            t = y[:, ai] / math.sqrt(haa)
            d2 = delta + t**2
            a2 = alpha + t * (beta[ai] / math.sqrt(haa))
            valid = d2 > _PD_TOL * scale
            if not valid.any():
                continue
            gains = np.where(valid, a2**2 / np.maximum(d2, np.finfo(float).tiny), -np.inf)
            ji = int(np.argmax(gains))
            q_new = q_minus + gains[ji]
            if q_new - q > best_gain:
                best_gain = q_new - q
                best_move = (ai, int(out[ji]))
        if best_move is None or best_gain <= _TIE_TOL * max(1.0, abs(q)):
            break
        idx[best_move[0]] = best_move[1]
        idx.sort()
        moves += 1
        state = _support_state(m, smat, idx, scale)
        if state is None:
            return None
    _, _, q = state
    return 1.0 - q, tuple(idx), moves


def bss_heuristic(m, s, k, opts: SolverOptions | None = None) -> SolveOutcome:
    """Forward stepwise plus single-swap local search, with seeded restarts.

    The stepwise start guarantees the final objective never exceeds the
    stepwise-only objective; random restarts explore other local basins.
    """
    opts = opts or DEFAULT_OPTIONS
    m = np.asarray(m, dtype=float)
    smat = _as_matrix(s)
    p = len(m)
    k = min(k, p)
    scale = max(float(np.max(np.abs(smat))), np.finfo(float).tiny)
    starts = []
    step_support = _stepwise_support(m, smat, k, scale)
    if step_support:
        starts.append(tuple(sorted(step_support)))
    rng_indices = np.arange(p)
    for r in range(opts.restarts):
        rng = child_rng(opts.seed, r)
        starts.append(tuple(sorted(rng.choice(rng_indices, size=k, replace=False).tolist())))
    best = None  # (objective, support, moves)
    for start in starts:
        res = _swap_descent(m, smat, start, opts, scale)
        if res is None:
            continue
        if best is None or res[0] < best[0] - _TIE_TOL or (
            abs(res[0] - best[0]) <= _TIE_TOL and res[1] < best[1]
        ):
            best = res
    if best is None:
        if np.any(m):
            raise ExistenceError("no support with a positive-definite block was found")
        best = (1.0, (), 0)
    obj, support, moves = best
    beta = np.zeros(p)
    if support:
        idx = list(support)
        beta[idx] = np.linalg.solve(smat[np.ix_(idx, idx)], m[idx])
    return SolveOutcome(
        beta=beta,
        objective=quad_objective(m, smat, beta),
        certificate=CERT_LOCAL_OPT,
        iterations=moves + len(starts),
    )


def _nonneg_cd(m, smat, opts):
    """Coordinate descent for min 1 - 2m'b + b'Sb over b >= 0.

    Returns (beta, objective, unbounded_direction). Zero diagonal entries with
    a positive linear term certify unboundedness immediately (row must vanish
    for PSD matrices).
    """
    p = len(m)
    diag = np.diag(smat)
    for j in range(p):
        if diag[j] <= 0.0 and m[j] > 0.0:
            e = np.zeros(p)
            e[j] = 1.0
            return None, None, e
    beta = np.zeros(p)
    grad = -m.copy()  # (1/2) grad of objective = S beta - m
    for sweep in range(opts.max_iterations):
        delta_max = 0.0
        for j in range(p):
            if diag[j] <= 0.0:
                continue
            target = max(0.0, beta[j] - grad[j] / diag[j])
            d = target - beta[j]
            if d != 0.0:
                beta[j] = target
                grad += d * smat[:, j]
                delta_max = max(delta_max, abs(d))
        obj = 1.0 - 2.0 * float(m @ beta) + float(beta @ (grad + m))
        if obj < _OBJ_FLOOR:
            norm = np.linalg.norm(beta)
            return None, None, beta / norm
        if delta_max <= 1e-14 * (1.0 + np.max(np.abs(beta), initial=0.0)):
            break
    else:
        raise ConvergenceError("nonnegative coordinate descent did not converge")
    # active-set polish: exact solve on the positive set when it stays feasible
    active = np.flatnonzero(beta > 0.0)
    if active.size:
        block = smat[np.ix_(active, active)]
        low = _chol_if_pd(block, max(float(np.max(np.abs(smat))), np.finfo(float).tiny))
        if low is not None:
            cand = np.linalg.solve(low.T, np.linalg.solve(low, m[active]))
            if np.all(cand >= 0.0):
                trial = np.zeros(p)
                trial[active] = cand
                g = smat @ trial - m
                if np.all(g >= -1e-9 * (1.0 + np.max(np.abs(m), initial=0.0))):
                    beta = trial
    return beta, quad_objective(m, smat, beta), None


def nonneg_quadratic(m, s, opts: SolverOptions | None = None) -> SolveOutcome:
    """Minimize the quadratic objective over the nonnegative orthant."""
    opts = opts or DEFAULT_OPTIONS
    m = np.asarray(m, dtype=float)
    smat = _as_matrix(s)
    beta, obj, witness = _nonneg_cd(m, smat, opts)
    if witness is not None:
        raise ExistenceError(
            "objective is unbounded over the nonnegative orthant",
            report=witness,
        )
    return SolveOutcome(beta=beta, objective=obj, certificate=CERT_KKT, iterations=1)


def _lasso_cd(m, smat, mu, beta, grad, opts):
    """Cyclic coordinate descent on the l1-penalized quadratic.

    beta/grad are updated in place (grad tracks S beta - m). Returns the sweep
    count, or -1 when the penalized problem is detected to be unbounded.
    """
    p = len(m)
    diag = np.diag(smat)
    limit = 1e10 * (1.0 + np.max(np.abs(m), initial=0.0))
    for sweep in range(opts.max_iterations):
        delta_max = 0.0
        for j in range(p):
            if diag[j] <= 0.0:
                if abs(m[j]) > mu + 1e-15:
                    return -1
                continue
            z = beta[j] * diag[j] - grad[j]
            target = math.copysign(max(abs(z) - mu, 0.0), z) / diag[j]
            d = target - beta[j]
            if d != 0.0:
                beta[j] = target
                grad += d * smat[:, j]
                delta_max = max(delta_max, abs(d))
        if np.sum(np.abs(beta)) > limit:
            return -1
        if delta_max <= 1e-14 * (1.0 + np.max(np.abs(beta), initial=0.0)):
            return sweep + 1
    raise ConvergenceError("lasso coordinate descent did not converge")


def _lasso_kkt_residual(m, smat, beta, mu, radius):
    """Relative KKT residual: stationarity, primal feasibility, complementarity."""
    grad = smat @ beta - m
    stat_scale = 1.0 + float(np.max(np.abs(m), initial=0.0))
    res = 0.0
    for j in range(len(m)):
        if beta[j] > 0:
            res = max(res, abs(grad[j] + mu) / stat_scale)
        elif beta[j] < 0:
            res = max(res, abs(grad[j] - mu) / stat_scale)
        else:
            res = max(res, (abs(grad[j]) - mu) / stat_scale)
    norm1 = float(np.sum(np.abs(beta)))
    res = max(res, (norm1 - radius) / (1.0 + radius))
    res = max(res, mu * max(radius - norm1, 0.0) / ((1.0 + radius) * (1.0 + mu)))
    return res


def _critical_penalty(m, smat):
    """Smallest penalty above which the l1-penalized quadratic is bounded.

    Unboundedness runs along null directions d of S with m'd > mu*||d||_1, so
    the critical penalty is max m'd/||d||_1 over the null space: zero when S
    is nonsingular or the mean is orthogonal to the null space, and otherwise
    the value of a small basis-pursuit linear program on that subspace.
    """
    w, vecs = np.linalg.eigh(smat)
    null = vecs[:, w <= 1e-12 * max(w[-1], np.finfo(float).tiny)]
    if null.shape[1] == 0:
        return 0.0
    proj = null.T @ m
    if np.max(np.abs(proj)) <= 1e-14 * max(np.linalg.norm(m), 1.0):
        return 0.0
    if null.shape[1] == 1:
        return float(abs(proj[0]) / np.sum(np.abs(null[:, 0])))
    from scipy import optimize as _sciopt

    p, r = null.shape
    # min sum(u) s.t. -u <= N z <= u, (N'm)' z = 1
    c = np.concatenate([np.zeros(r), np.ones(p)])
    a_ub = np.block([[null, -np.eye(p)], [-null, -np.eye(p)]])
    b_ub = np.zeros(2 * p)
    a_eq = np.concatenate([proj, np.zeros(p)])[None, :]
    res = _sciopt.linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0],
                          bounds=[(None, None)] * r + [(0, None)] * p, method="highs")
    if not res.success or res.fun <= 0:
        return 0.0
    return float(1.0 / res.fun)


def _project_l1(v, radius):
    """Euclidean projection onto the l1 ball (sort-based threshold)."""
    norm1 = float(np.sum(np.abs(v)))
    if norm1 <= radius:
        return v.copy()
    mags = np.sort(np.abs(v))[::-1]
    css = np.cumsum(mags) - radius
    idx = np.arange(1, len(v) + 1)
    rho = np.nonzero(mags > css / idx)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


def _fista_l1(m, smat, radius, opts, beta0=None):
    """Accelerated projected gradient on the constrained problem.

    Rescue path for the corner the penalty bisection cannot reach: a singular
    S whose constrained optimum lies on the flat piece beyond every finite
    penalized solution. The feasible set is compact, so no unboundedness
    cases arise here.
    """
    p = len(m)
    lip = 2.0 * max(float(np.linalg.eigvalsh(smat)[-1]), np.finfo(float).tiny)
    step = 1.0 / lip
    x = _project_l1(np.zeros(p) if beta0 is None else np.asarray(beta0, float), radius)
    y = x.copy()
    t = 1.0
    prev_obj = quad_objective(m, smat, x)
    for _ in range(10 * opts.max_iterations):
        grad = 2.0 * (smat @ y - m)
        x_new = _project_l1(y - step * grad, radius)
        obj = quad_objective(m, smat, x_new)
        if obj > prev_obj:  # adaptive restart
            y = x_new.copy()
            t = 1.0
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        move = float(np.max(np.abs(x_new - x)))
        x = x_new
        prev_obj = obj
        if move <= 1e-13 * (1.0 + float(np.max(np.abs(x)))):
            break
    return x


def _face_polish(m, smat, beta, radius):
    """Exact solve on the sign face identified by an approximate solution.

    Tries the boundary face (||beta||_1 = radius with a multiplier) and the
    interior face (zero multiplier); returns (beta, mu) for whichever passes
    the KKT conditions best, or None when neither does.
    """
    p = len(m)
    top = float(np.max(np.abs(beta), initial=0.0))
    if top <= 0.0:
        return None
    active = np.flatnonzero(np.abs(beta) > 1e-10 * top)
    if active.size == 0:
        return None
    sign = np.sign(beta[active])
    block = smat[np.ix_(active, active)]
    candidates = []
    # boundary: stationarity 2(S beta - m) + 2 mu sign = 0 plus sign'beta = r
    k = active.size
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = block
    kkt[:k, k] = sign
    kkt[k, :k] = sign
    rhs = np.concatenate([m[active], [radius]])
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    cand = np.zeros(p)
    cand[active] = sol[:k]
    candidates.append((cand, max(float(sol[k]), 0.0)))
    # interior: plain restricted solve with zero multiplier
    sol_in, *_ = np.linalg.lstsq(block, m[active], rcond=None)
    cand_in = np.zeros(p)
    cand_in[active] = sol_in
    candidates.append((cand_in, 0.0))
    best = None
    for cand, mu in candidates:
        if np.any(np.sign(cand[active]) * sign < 0):
            continue
        res = _lasso_kkt_residual(m, smat, cand, mu, radius)
        if best is None or res < best[2]:
            best = (cand, mu, res)
    if best is None:
        return None
    return best[0], best[1], best[2]


def lasso_constrained(m, s, radius, opts: SolverOptions | None = None) -> SolveOutcome:
    """Minimize the quadratic objective subject to ||beta||_1 <= radius.

    Solved through the penalized form with a bisection on the penalty until
    the constraint is tight (or slack at zero penalty), then polished exactly
    on the identified sign face. Works directly on (m, S), so the
    constant-response regression form needs no special casing.
    """
    opts = opts or DEFAULT_OPTIONS
    m = np.asarray(m, dtype=float)
    smat = _as_matrix(s)
    if radius <= 0:
        raise ValueError("radius must be positive")
    p = len(m)
    if not np.any(m):
        return SolveOutcome(np.zeros(p), 1.0, CERT_KKT, 0)
    scale = 1.0 + float(np.max(np.abs(m)))
    rtol = 1e-9 * (1.0 + radius)
    # interior shortcut: positive definite S with the unconstrained optimum feasible
    low = _chol_if_pd(smat, max(float(np.max(np.abs(smat))), np.finfo(float).tiny))
    if low is not None:
        free = np.linalg.solve(low.T, np.linalg.solve(low, m))
        if np.sum(np.abs(free)) <= radius + rtol:
            return SolveOutcome(free, quad_objective(m, smat, free), CERT_KKT, 1)
    mu_hi = float(np.max(np.abs(m)))
    mu_lo = _critical_penalty(m, smat)
    beta = np.zeros(p)
    grad = -m.copy()
    sweeps = 0
    lo, hi = mu_lo, mu_hi
    beta_hi = np.zeros(p)
    beta_lo = None
    mu = hi
    for _ in range(100):
        mu = 0.5 * (lo + hi)
        got = _lasso_cd(m, smat, mu, beta, grad, opts)
        if got < 0:  # safety: runaway iterates treated as the over-radius side
            lo = mu
            beta_lo = None
            beta = np.zeros(p)
            grad = -m.copy()
            continue
        sweeps += got
        norm1 = float(np.sum(np.abs(beta)))
        if abs(norm1 - radius) <= rtol:
            break
        if norm1 > radius:
            lo, beta_lo = mu, beta.copy()
        else:
            hi, beta_hi = mu, beta.copy()
            if hi <= mu_lo + 1e-14 * scale:
                break
        if hi - lo <= 1e-14 * scale:
            break
    norm1 = float(np.sum(np.abs(beta)))
    if norm1 > radius + rtol and beta_lo is not None and np.any(beta_hi):
        # straddle: move back to the feasible side before polishing
        beta = beta_hi
        norm1 = float(np.sum(np.abs(beta)))
    if norm1 < radius - rtol and mu_lo > 1e-14 * scale:
        # flat piece: the optimum lies beyond every finite penalized solution
        beta = _fista_l1(m, smat, radius, opts, beta0=beta)
        mu = mu_lo
    polished = _face_polish(m, smat, beta, radius)
    residual = _lasso_kkt_residual(m, smat, beta, mu, radius)
    if polished is not None and polished[2] < residual:
        beta, mu, residual = polished
    if residual > 1e-8:
        raise ConvergenceError(
            f"lasso KKT residual {residual:.2e} above tolerance at radius {radius:g}"
        )
    return SolveOutcome(beta, quad_objective(m, smat, beta), CERT_KKT, sweeps)


def lasso_cone_solve(m, s, t, opts: SolverOptions | None = None) -> SolveOutcome:
    """Self-consistent l1 radius: beta solves the constrained problem at
    radius r while r = t * sqrt(beta' S beta).

    The map can have several fixed points, so a 50-point log-grid of starting
    radii is swept alongside the heuristic start and every fixed point found
    is scored; the one maximizing m'beta / sqrt(beta'S beta) wins.
    """
    opts = opts or DEFAULT_OPTIONS
    m = np.asarray(m, dtype=float)
    smat = _as_matrix(s)
    p = len(m)
    if t <= 0:
        raise ValueError("t must be positive")
    if not np.any(m):
        return SolveOutcome(np.zeros(p), 1.0, CERT_FIXED_POINT, 0)

    def ray_scale(beta):
        return float(beta @ smat @ beta)

    def iterate(r0):
        r = r0
        for it in range(60):
            if not r > 0:
                return None
            out = lasso_constrained(m, smat, r, opts)
            quad = ray_scale(out.beta)
            if quad <= 0:
                return None
            r_next = t * math.sqrt(quad)
            if abs(r_next - r) <= 1e-8 * (1.0 + r):
                return out, it + 1
            r = r_next
        return None

    m_sq = float(m @ m)
    quad_m = float(m @ smat @ m)
    starts = []
    if quad_m > 0:
        starts.append(t / math.sqrt(quad_m / m_sq))
    r_top = 1.5 * t * t * float(np.max(np.abs(m)))
    starts.extend(np.geomspace(max(r_top * 1e-6, 1e-12), r_top, 50).tolist())
    best = None
    best_t = 0.0
    iters = 0
    for r0 in starts:
        got = iterate(r0)
        if got is None:
            continue
        out, used = got
        iters += used
        quad = ray_scale(out.beta)
        score = float(m @ out.beta) / math.sqrt(quad)
        if best is None or score > best_t + 1e-12:
            best, best_t = out, score
    if best is None:
        return SolveOutcome(np.zeros(p), 1.0, CERT_FIXED_POINT, iters)
    return replace(best, certificate=CERT_FIXED_POINT, iterations=iters)


def regression_solve(x, cone, opts: SolverOptions | None = None) -> SolveOutcome:
    """Minimize (1/n)||iota - X beta||^2 over beta in the cone.

    Expands to the quadratic form with the Gram matrix and dispatches to the
    matching engine; the reported objective is the mean squared residual.
    """
    from . import cones as _cones
    from .estimators import gram_matrix, sample_mean

    opts = opts or DEFAULT_OPTIONS
    m = sample_mean(x)
    gram = gram_matrix(x)
    p = len(m)
    if isinstance(cone, _cones.FullSpace):
        low = _chol_if_pd(gram, max(float(np.max(np.abs(gram))), np.finfo(float).tiny))
        if low is None:
            raise ExistenceError("gram matrix is singular; full-space solve undefined")
        beta = np.linalg.solve(low.T, np.linalg.solve(low, m))
        return SolveOutcome(beta, quad_objective(m, gram, beta), CERT_KKT, 1)
    if isinstance(cone, _cones.Coordinate):
        j = cone.index
        beta = np.zeros(p)
        if gram[j, j] > 0:
            beta[j] = m[j] / gram[j, j]
        return SolveOutcome(beta, quad_objective(m, gram, beta), CERT_KKT, 1)
    if isinstance(cone, _cones.NonNegOrthant):
        return nonneg_quadratic(m, gram, opts)
    if isinstance(cone, _cones.KSparse):
        if subset_total(p, cone.k) <= opts.exhaustive_limit:
            return bss_exhaustive(m, gram, cone.k, opts)
        return bss_heuristic(m, gram, cone.k, opts)
    if isinstance(cone, _cones.LassoCone):
        return _regression_lasso_cone(m, gram, cone.t, opts)
    raise _cones.UnsupportedConeOperation(
        f"regression solve not implemented for {type(cone).__name__}"
    )


def _regression_lasso_cone(m, gram, t, opts):
    """Lasso-cone fixed point in the regression form.

    The cone's ellipsoid is the sample covariance, so the radius map uses
    beta'(G - mm')beta while the objective keeps the Gram matrix.
    """
    p = len(m)
    if not np.any(m):
        return SolveOutcome(np.zeros(p), 1.0, CERT_FIXED_POINT, 0)

    def cov_quad(beta):
        return float(beta @ gram @ beta) - float(m @ beta) ** 2

    def iterate(r0):
        r = r0
        for it in range(60):
            if not r > 0:
                return None
            out = lasso_constrained(m, gram, r, opts)
            quad = cov_quad(out.beta)
            if quad <= 0:
                return None
            r_next = t * math.sqrt(quad)
            if abs(r_next - r) <= 1e-8 * (1.0 + r):
                return out, it + 1
            r = r_next
        return None

    r_top = 1.5 * t * t * float(np.max(np.abs(m)))
    starts = np.geomspace(max(r_top * 1e-6, 1e-12), r_top, 50).tolist()
    best, best_t, iters = None, 0.0, 0
    for r0 in starts:
        got = iterate(r0)
        if got is None:
            continue
        out, used = got
        iters += used
        quad = cov_quad(out.beta)
        if quad <= 0:
            continue
        score = float(m @ out.beta) / math.sqrt(quad)
        if best is None or score > best_t + 1e-12:
            best, best_t = out, score
    if best is None:
        return SolveOutcome(np.zeros(p), 1.0, CERT_FIXED_POINT, iters)
    return replace(best, certificate=CERT_FIXED_POINT, iterations=iters)
