"""The conic test statistic: max of m'lambda over the unit ellipsoid
{lambda' S lambda = 1} intersected with a cone.

Three computation paths produce the same statistic where their preconditions
overlap: a restricted quadratic minimization (any covariance), a minimum
distance projection (diagonal covariance + scone), and a constant-response
regression (sample moments). Results record which path ran.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize as _sciopt

from . import cones as _cones
from . import solvers as _solvers
from .errors import DegenerateInputError, ExistenceError, UnsupportedConeOperation
from .estimators import CovEstimate, as_cov, sample_covariance, sample_mean

PATH_QUADRATIC = "quadratic_form"
PATH_DIAGONAL = "diagonal_closed_form"
PATH_REGRESSION = "regression"


@dataclass(frozen=True)
class ConicStatResult:
    """Statistic value with the attaining direction and minimizer.

    maximizer sits on the unit ellipsoid (zero when degenerate); minimizer is
    the quadratic-form solution, parallel to maximizer when both are nonzero.
    min_restricted_eig is a diagnostic: the smallest eigenvalue of the
    covariance restricted to the selected support.
    """

    statistic: float
    maximizer: np.ndarray
    minimizer: np.ndarray
    support: tuple
    path: str
    min_restricted_eig: float | None = None


@dataclass(frozen=True)
class ExistenceReport:
    """Outcome of the restricted eigenvalue condition check.

    witness, when present, is a cone direction with m'witness > 0 along which
    the ellipsoid degenerates; rank/required_rank carry the sparse-cone rank
    screen.
    """

    exists: bool
    witness: np.ndarray | None = None
    rank: int | None = None
    required_rank: int | None = None
    detail: str = ""


def _zero_result(p, path, diag=None):
    return ConicStatResult(0.0, np.zeros(p), np.zeros(p), (), path, diag)


def _check_mean(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 1:
        raise ValueError(f"mean must be a vector, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise DegenerateInputError("mean contains non-finite entries")
    return m


def _from_beta(m, smat, beta, path, diag=None):
    """Normalize a minimizer onto the ellipsoid; degenerate solutions map to zero."""
    p = len(m)
    beta = np.asarray(beta, dtype=float)
    if not np.any(beta):
        return _zero_result(p, path, diag)
    quad = float(beta @ smat @ beta)
    if quad <= 0.0:
        return _zero_result(p, path, diag)
    lam = beta / math.sqrt(quad)
    stat = float(m @ lam)
    if stat <= 0.0:
        return _zero_result(p, path, diag)
    support = tuple(int(j) for j in np.flatnonzero(beta))
    if diag is None:
        diag = _support_min_eig(smat, support)
    return ConicStatResult(stat, lam, beta, support, path, diag)


def _support_min_eig(smat, support):
    if not support:
        return None
    idx = list(support)
    return float(np.linalg.eigvalsh(smat[np.ix_(idx, idx)])[0])


def wald_statistic(m, s) -> ConicStatResult:
    """sqrt(m' S^-1 m) with the attaining direction S^-1 m (rescaled).

    Requires S positive definite at its rank tolerance; otherwise raises an
    ExistenceError carrying the failure report.
    """
    m = _check_mean(m)
    cov = as_cov(s)
    report = existence_check(m, cov, _cones.FullSpace(len(m)))
    if not report.exists:
        raise ExistenceError("covariance is singular; Wald statistic undefined", report)
    if not np.any(m):
        return _zero_result(len(m), PATH_QUADRATIC, float(np.linalg.eigvalsh(cov.matrix)[0]))
    beta = np.linalg.solve(cov.matrix, m)
    return _from_beta(m, cov.matrix, beta, PATH_QUADRATIC,
                      float(np.linalg.eigvalsh(cov.matrix)[0]))


def existence_check(m, s, cone) -> ExistenceReport:
    """Restricted eigenvalue condition: min of lambda'S lambda over cone
    directions with m'lambda = 1 must be positive."""
    m = _check_mean(m)
    cov = as_cov(s)
    smat = cov.matrix
    p = len(m)
    if cone.p != p:
        raise ValueError(f"cone dimension {cone.p} != mean length {p}")
    scale = max(float(np.max(np.abs(smat))), np.finfo(float).tiny)
    tol = cov.rank_tolerance

    if isinstance(cone, _cones.FullSpace):
        w, vecs = np.linalg.eigh(smat)
        rank = int(np.sum(w > tol * max(w[-1], 0.0)))
        if w[0] > tol * max(w[-1], np.finfo(float).tiny):
            return ExistenceReport(True, rank=rank, required_rank=p)
        witness = _null_witness(m, vecs[:, 0])
        return ExistenceReport(False, witness=witness, rank=rank, required_rank=p,
                               detail="covariance singular on the full space")

    if isinstance(cone, (_cones.KSparse, _cones.Intersection)) and _ksparse_member(cone):
        k = _ksparse_member(cone).k
        w = np.linalg.eigvalsh(smat)
        rank = int(np.sum(w > tol * max(w[-1], 0.0)))
        if rank >= k:
            return ExistenceReport(True, rank=rank, required_rank=k)
        witness = _sparse_witness(m, smat, k, scale)
        return ExistenceReport(False, witness=witness, rank=rank, required_rank=k,
                               detail=f"rank {rank} below sparsity level {k}")

    if isinstance(cone, _cones.Coordinate) or (
        isinstance(cone, _cones.Intersection) and _coordinate_member(cone)
    ):
        coord = cone if isinstance(cone, _cones.Coordinate) else _coordinate_member(cone)
        onesided = isinstance(cone, _cones.Intersection)
        j = coord.index
        relevant = m[j] > 0 if onesided else m[j] != 0
        if smat[j, j] > tol * scale or not relevant:
            return ExistenceReport(True)
        e = np.zeros(p)
        e[j] = 1.0 if onesided else math.copysign(1.0, m[j])
        return ExistenceReport(False, witness=e, detail=f"zero variance on coordinate {j}")

    if isinstance(cone, _cones.FiniteDirections):
        for d in cone.directions:
            quad = float(d @ smat @ d)
            inner = float(m @ d)
            if inner > 0 and quad <= tol * scale * float(d @ d):
                return ExistenceReport(False, witness=d / np.linalg.norm(d),
                                       detail="degenerate direction with positive mean component")
        return ExistenceReport(True)

    if isinstance(cone, _cones.NonNegOrthant):
        if not np.any(m > 0):
            return ExistenceReport(True, detail="constraint set empty; statistic is zero")
        value, arg = _orthant_min(m, smat)
        if value > 1e-8 * scale:
            return ExistenceReport(True)
        return ExistenceReport(False, witness=arg / np.linalg.norm(arg),
                               detail="ellipsoid degenerates inside the orthant")

    if isinstance(cone, _cones.LassoCone):
        return ExistenceReport(
            True, detail="the l1-over-ellipsoid cone excludes degenerate directions"
        )

    raise UnsupportedConeOperation(
        f"existence check not implemented for {type(cone).__name__}"
    )


def _ksparse_member(cone):
    if isinstance(cone, _cones.KSparse):
        return cone
    if isinstance(cone, _cones.Intersection):
        ks = [c for c in cone.members if isinstance(c, _cones.KSparse)]
        rest = [c for c in cone.members if not isinstance(c, (_cones.KSparse, _cones.NonNegOrthant, _cones.FullSpace))]
        if len(ks) == 1 and not rest:
            return ks[0]
    return None


def _coordinate_member(cone):
    if isinstance(cone, _cones.Intersection):
        coords = [c for c in cone.members if isinstance(c, _cones.Coordinate)]
        rest = [c for c in cone.members if not isinstance(c, (_cones.Coordinate, _cones.NonNegOrthant, _cones.FullSpace))]
        if len(coords) == 1 and not rest:
            return coords[0]
    return None


def _has_nonneg(cone):
    return isinstance(cone, _cones.Intersection) and any(
        isinstance(c, _cones.NonNegOrthant) for c in cone.members
    )


def _null_witness(m, vec):
    inner = float(m @ vec)
    if abs(inner) <= 1e-12 * max(np.linalg.norm(m), 1.0):
        return None
    return vec if inner > 0 else -vec


def _sparse_witness(m, smat, k, scale):
    """Search small problems for a singular support with m' w > 0."""
    p = len(m)
    if _solvers.subset_total(p, k) > 5000:
        return None
    from itertools import combinations

    for sup in combinations(range(p), min(k, p)):
        idx = list(sup)
        w, vecs = np.linalg.eigh(smat[np.ix_(idx, idx)])
        if w[0] <= 1e-12 * scale:
            full = np.zeros(p)
            full[idx] = vecs[:, 0]
            cand = _null_witness(m, full)
            if cand is not None:
                return cand
    return None


def _orthant_min(m, smat):
    """min lambda'S lambda subject to lambda >= 0, m'lambda = 1 (SLSQP, multistart)."""
    p = len(m)
    best_val, best_arg = np.inf, None
    starts = []
    pos = np.flatnonzero(m > 0)
    for j in pos[:5]:
        e = np.zeros(p)
        e[j] = 1.0 / m[j]
        starts.append(e)
    base = np.clip(m, 0.0, None)
    denom = float(m @ base)
    if denom > 0:
        starts.append(base / denom)
    for x0 in starts:
        res = _sciopt.minimize(
            lambda x: float(x @ smat @ x),
            x0,
            jac=lambda x: 2.0 * (smat @ x),
            bounds=[(0.0, None)] * p,
            constraints=[{"type": "eq", "fun": lambda x: float(m @ x) - 1.0,
                          "jac": lambda x: m}],
            method="SLSQP",
            options={"maxiter": 200, "ftol": 1e-14},
        )
        if res.x is not None and float(m @ res.x) > 0.5:
            val = float(res.x @ smat @ res.x)
            if val < best_val:
                best_val, best_arg = val, res.x
    if best_arg is None:
        return np.inf, np.zeros(p)
    return best_val, best_arg


def conic_statistic(m, s, cone, opts=None, path: str = "auto") -> ConicStatResult:
    """Compute the statistic for an arbitrary supported cone.

    path="auto" routes diagonal covariances with scones through the
    minimum-distance closed form and everything else through restricted
    quadratic minimization; "quadratic_form" / "diagonal_closed_form" force a
    specific route (used by the path-equivalence tests).
    """
    m = _check_mean(m)
    cov = as_cov(s)
    if cone.p != len(m):
        raise ValueError(f"cone dimension {cone.p} != mean length {len(m)}")
    if path == "auto":
        path = PATH_DIAGONAL if (cov.is_diagonal and cone.is_scone()) else PATH_QUADRATIC
    if path == PATH_DIAGONAL:
        if not (cov.is_diagonal and cone.is_scone()):
            raise ValueError("diagonal closed form requires a diagonal covariance and a scone")
        return _solve_diag_scone(m, cov, cone)
    if path == PATH_QUADRATIC:
        return _solve_quadratic(m, cov, cone, opts or _solvers.DEFAULT_OPTIONS)
    raise ValueError(f"unknown computation path {path!r}")


def _diag_values(cov: CovEstimate) -> np.ndarray:
    d = cov.diagonal()
    if np.any(d <= 0.0):
        bad = tuple(int(j) for j in np.flatnonzero(d <= 0.0))
        raise DegenerateInputError(
            f"diagonal statistic needs strictly positive variances; zero at columns {bad}"
        )
    return d


def _scone_project(z, cone):
    """Closest point to z inside the scone (the minimum distance step)."""
    p = len(z)
    if isinstance(cone, _cones.FullSpace):
        return z.copy()
    if isinstance(cone, _cones.NonNegOrthant):
        return np.clip(z, 0.0, None)
    if isinstance(cone, _cones.Coordinate):
        out = np.zeros(p)
        out[cone.index] = z[cone.index]
        return out
    if isinstance(cone, _cones.KSparse):
        out = np.zeros(p)
        order = np.argsort(-np.abs(z), kind="stable")[: cone.k]
        out[order] = z[order]
        return out
    if isinstance(cone, _cones.FiniteDirections):
        best_out, best_gain = np.zeros(p), 0.0
        for d in cone.directions:
            gamma = max(float(z @ d), 0.0) / float(d @ d)
            gain = gamma * float(z @ d)
            if gain > best_gain:
                best_gain, best_out = gain, gamma * d
        return best_out
    if isinstance(cone, _cones.Intersection):
        coord = next((c for c in cone.members if isinstance(c, _cones.Coordinate)), None)
        nonneg = any(isinstance(c, _cones.NonNegOrthant) for c in cone.members)
        ks = [c.k for c in cone.members if isinstance(c, _cones.KSparse)]
        others = [
            c for c in cone.members
            if not isinstance(c, (_cones.Coordinate, _cones.NonNegOrthant,
                                  _cones.KSparse, _cones.FullSpace))
        ]
        if others:
            raise UnsupportedConeOperation(
                "scone projection supports intersections of coordinate, orthant, "
                "sparsity and full-space cones only"
            )
        coords = {c.index for c in cone.members if isinstance(c, _cones.Coordinate)}
        if len(coords) > 1:
            return np.zeros(p)
        work = np.clip(z, 0.0, None) if nonneg else z.copy()
        if coord is not None:
            out = np.zeros(p)
            out[coord.index] = work[coord.index]
            return out
        k = min(ks) if ks else p
        out = np.zeros(p)
        order = np.argsort(-np.abs(work), kind="stable")[:k]
        out[order] = work[order]
        return out
    raise UnsupportedConeOperation(f"no scone projection for {type(cone).__name__}")


def _solve_diag_scone(m, cov: CovEstimate, cone) -> ConicStatResult:
    d = _diag_values(cov)
    sroot = np.sqrt(d)
    z = m / sroot
    beta = _scone_project(z, cone)
    if not np.any(beta):
        return _zero_result(len(m), PATH_DIAGONAL)
    lam = (beta / sroot) / np.linalg.norm(beta)
    stat = float(m @ lam)
    if stat <= 0.0:
        return _zero_result(len(m), PATH_DIAGONAL)
    support = tuple(int(j) for j in np.flatnonzero(beta))
    min_eig = float(np.min(d[list(support)]))
    # report the quadratic-form minimizer scale so paths agree on the ray
    return ConicStatResult(stat, lam, stat * lam, support, PATH_DIAGONAL, min_eig)


def _solve_quadratic(m, cov: CovEstimate, cone, opts) -> ConicStatResult:
    smat = cov.matrix
    p = len(m)
    scale = max(float(np.max(np.abs(smat))), np.finfo(float).tiny)

    if isinstance(cone, _cones.FullSpace):
        return wald_statistic(m, cov)

    if isinstance(cone, _cones.Coordinate):
        return _coordinate_result(m, smat, cone.index, onesided=False, scale=scale,
                                  tol=cov.rank_tolerance)

    if isinstance(cone, _cones.NonNegOrthant):
        try:
            out = _solvers.nonneg_quadratic(m, smat, opts)
        except ExistenceError as exc:
            report = ExistenceReport(False, witness=exc.report,
                                     detail="unbounded over the orthant")
            raise ExistenceError(str(exc), report) from None
        return _from_beta(m, smat, out.beta, PATH_QUADRATIC)

    if isinstance(cone, _cones.KSparse):
        return _ksparse_result(m, smat, cone.k, opts, nonneg=False, cov=cov)

    if isinstance(cone, _cones.FiniteDirections):
        return _finite_directions_result(m, smat, cone, scale, cov.rank_tolerance)

    if isinstance(cone, _cones.LassoCone):
        out = _solvers.lasso_cone_solve(m, smat, cone.t, opts)
        return _from_beta(m, smat, out.beta, PATH_QUADRATIC)

    if isinstance(cone, _cones.Intersection):
        coord = _coordinate_member(cone)
        if coord is not None and _has_nonneg(cone):
            return _coordinate_result(m, smat, coord.index, onesided=True, scale=scale,
                                      tol=cov.rank_tolerance)
        ks = _ksparse_member(cone)
        if ks is not None and _has_nonneg(cone):
            return _ksparse_result(m, smat, ks.k, opts, nonneg=True, cov=cov)
        if all(isinstance(c, (_cones.NonNegOrthant, _cones.FullSpace)) for c in cone.members):
            return _solve_quadratic(m, cov, _cones.NonNegOrthant(p), opts)
        raise UnsupportedConeOperation(
            "quadratic solve supports coordinate/orthant and sparse/orthant intersections only"
        )

    raise UnsupportedConeOperation(f"no quadratic-form solver for {type(cone).__name__}")


def _coordinate_result(m, smat, j, onesided, scale, tol):
    p = smat.shape[0]
    value = m[j] if not onesided else max(m[j], 0.0)
    if value == 0.0:
        return _zero_result(p, PATH_QUADRATIC, float(smat[j, j]))
    if smat[j, j] <= tol * scale:
        e = np.zeros(p)
        e[j] = 1.0 if onesided else math.copysign(1.0, m[j])
        report = ExistenceReport(False, witness=e, detail=f"zero variance on coordinate {j}")
        raise ExistenceError("degenerate coordinate direction", report)
    beta = np.zeros(p)
    beta[j] = value / smat[j, j]
    return _from_beta(m, smat, beta, PATH_QUADRATIC, float(smat[j, j]))


def _ksparse_result(m, smat, k, opts, nonneg, cov):
    p = len(m)
    if _solvers.subset_total(p, k) <= opts.exhaustive_limit:
        out = _solvers.bss_exhaustive(m, smat, k, opts, nonneg=nonneg)
    elif nonneg:
        raise UnsupportedConeOperation(
            "no heuristic for the sign-constrained sparse cone with a full covariance; "
            "use a diagonal estimator or raise exhaustive_limit"
        )
    else:
        out = _solvers.bss_heuristic(m, smat, k, opts)
    return _from_beta(m, smat, out.beta, PATH_QUADRATIC)


def _finite_directions_result(m, smat, cone, scale, tol):
    p = cone.p
    best_val, best_dir = 0.0, None
    for d in cone.directions:
        quad = float(d @ smat @ d)
        inner = float(m @ d)
        if quad <= tol * scale * float(d @ d):
            if inner > 0:
                report = ExistenceReport(False, witness=d / np.linalg.norm(d),
                                         detail="degenerate direction with positive mean component")
                raise ExistenceError("unbounded along a cone direction", report)
            continue
        val = inner / math.sqrt(quad)
        if val > best_val:
            best_val, best_dir = val, d
    if best_dir is None:
        return _zero_result(p, PATH_QUADRATIC)
    lam = best_dir / math.sqrt(float(best_dir @ smat @ best_dir))
    beta = best_val * lam
    return _from_beta(m, smat, beta, PATH_QUADRATIC)


def k_sparse_diag_statistic(m, s, k) -> ConicStatResult:
    """Closed form for the sign-symmetric sparse cone with diagonal covariance:
    keep the k largest |m_j|/s_j ratios (lower index on exact ties)."""
    m = _check_mean(m)
    cov = as_cov(s)
    if not cov.is_diagonal:
        raise DegenerateInputError("k_sparse_diag_statistic requires a diagonal covariance")
    if not 1 <= k <= len(m):
        raise ValueError(f"k={k} out of range for p={len(m)}")
    return _solve_diag_scone(m, cov, _cones.KSparse(k, len(m)))


def regression_statistic(x, cone, opts=None) -> ConicStatResult:
    """Statistic via the constant-response regression route.

    The minimizer comes from the Gram-matrix quadratic form; the attaining
    direction is normalized by the sample covariance, not the Gram matrix.
    """
    opts = opts or _solvers.DEFAULT_OPTIONS
    m = sample_mean(x)
    cov = sample_covariance(x)
    out = _solvers.regression_solve(x, cone, opts)
    beta = out.beta
    if not np.any(beta):
        return _zero_result(len(m), PATH_REGRESSION)
    quad = float(beta @ cov.matrix @ beta)
    if quad <= 0.0:
        return _zero_result(len(m), PATH_REGRESSION)
    lam = beta / math.sqrt(quad)
    stat = float(m @ lam)
    if stat <= 0.0:
        return _zero_result(len(m), PATH_REGRESSION)
    support = tuple(int(j) for j in np.flatnonzero(beta))
    return ConicStatResult(stat, lam, beta, support, PATH_REGRESSION,
                           _support_min_eig(cov.matrix, support))


def geometric_decomposition(m, s, result: ConicStatResult) -> float:
    """Length of the projection of m onto the attaining direction, scaled by
    the ellipsoid stretch along it; equals the statistic by construction."""
    m = _check_mean(m)
    cov = as_cov(s)
    lam = np.asarray(result.maximizer, dtype=float)
    if not np.any(lam):
        raise DegenerateInputError("geometric decomposition needs a nonzero maximizer")
    ll = float(lam @ lam)
    lsl = float(lam @ cov.matrix @ lam)
    if lsl <= 0.0:
        raise DegenerateInputError("maximizer has nonpositive ellipsoid norm")
    proj = (float(lam @ m) / ll) * lam
    return float(math.sqrt(ll / lsl) * np.linalg.norm(proj))
