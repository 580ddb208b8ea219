"""Vectorized statistic evaluation across sign-flip resamples.

Reflections leave the Gram matrix invariant: (RX)'(RX) = X'X, and the
resampled covariance is the rank-one downdate G - m m'. Every fast path below
exploits that identity, recomputing both the mean and the covariance of each
resample exactly while sharing the heavy factorizations.

The sparse full-covariance path runs forward stepwise on the Gram form; by
the regression equivalence the selection criterion q = m_J' G_JJ^-1 m_J is a
monotone transform of the covariance-form score (q -> q/(1-q)), so the
selected supports and the final statistic match the covariance-form greedy
exactly.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import linalg as _slinalg

from . import cones as _cones
from .errors import ExistenceError

_PD_TOL = 1e-10
_SAT_TOL = 1e-12  # 1 - q below this means the support saturates the ellipsoid


def _topk_sum(values, k):
    m, p = values.shape
    if k >= p:
        return values.sum(axis=1)
    part = np.partition(values, p - k, axis=1)[:, p - k :]
    return part.sum(axis=1)


def stepwise_gram_batch(gram, means, k, tol=None):
    """Forward stepwise for every row of means simultaneously.

    Returns (q, support) where q[b] = m_J' G_JJ^-1 m_J for the selected
    support J of row b (padded with -1 when candidates run out).
    """
    b, p = means.shape
    gdiag = np.ascontiguousarray(np.diag(gram))
    scale = max(float(gdiag.max(initial=0.0)), np.finfo(float).tiny)
    floor = (_PD_TOL if tol is None else tol) * scale
    resid_d = np.tile(gdiag, (b, 1))
    resid_c = means.astype(float).copy()
    w = np.empty((k, b, p))
    q = np.zeros(b)
    support = np.full((b, k), -1, dtype=np.int64)
    rows = np.arange(b)
    gains = np.empty((b, p))
    bad = np.empty((b, p), dtype=bool)
    taken = np.zeros((b, p), dtype=bool)
    for step in range(min(k, p)):
        np.square(resid_c, out=gains)
        gains /= np.maximum(resid_d, np.finfo(float).tiny)
        np.less_equal(resid_d, floor, out=bad)
        np.logical_or(bad, taken, out=bad)
        gains[bad] = -1.0
        a = np.argmax(gains, axis=1)
        ok = gains[rows, a] >= 0.0
        if not ok.any():
            break
        a = np.where(ok, a, 0)
        raa = np.sqrt(np.maximum(resid_d[rows, a], np.finfo(float).tiny))
        if step:
            wa = w[:step, rows, a]  # (step, b)
            proj = np.einsum("ib,ibp->bp", wa, w[:step], optimize=True)
            wnew = gram[a, :] - proj
        else:
            wnew = gram[a, :].copy()
        wnew /= raa[:, None]
        cnew = resid_c[rows, a] / raa
        if not ok.all():
            wnew[~ok] = 0.0
            cnew[~ok] = 0.0
        w[step] = wnew
        q += cnew * cnew
        resid_d -= wnew * wnew
        resid_c -= wnew * cnew[:, None]
        sel = rows[ok]
        support[sel, step] = a[ok]
        taken[sel, a[ok]] = True
    return q, support


def _estimator_sig2(estimator, means, gdiag, tr_gram, p):
    """Per-resample variance diagonals (or pooled scalar column)."""
    if estimator in ("full", "diagonal"):
        return gdiag[None, :] - means**2
    if estimator == "pooled":
        pool = (tr_gram - (means**2).sum(axis=1)) / p
        return pool[:, None]
    return None


def batched_conic_statistics(x, cone, estimator, signs, opts):
    """Fast-path statistic for each reflection; None when no path applies.

    Returns (stat, failed) where failed marks resamples whose restricted
    eigenvalue condition degenerated (their statistic is set to 0).
    """
    if not isinstance(estimator, str):
        return None
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    means = signs @ x / n
    mcount = means.shape[0]
    gdiag = (x**2).sum(axis=0) / n
    tr_gram = float(gdiag.sum())
    failed = np.zeros(mcount, dtype=bool)

    def with_fail(stat2, bad):
        failed[bad] = True
        stat2 = np.where(failed, 0.0, np.maximum(stat2, 0.0))
        return np.sqrt(stat2), failed

    if isinstance(cone, _cones.FullSpace):
        if estimator == "full":
            gram = x.T @ x / n
            try:
                low = np.linalg.cholesky(gram)
            except np.linalg.LinAlgError:
                raise ExistenceError("gram matrix singular; full-space statistic undefined")
            if np.min(np.diag(low)) ** 2 <= _PD_TOL * max(gdiag.max(), 1e-300):
                raise ExistenceError("covariance singular; full-space statistic undefined")
            z = _slinalg.solve_triangular(low, means.T, lower=True)
            q = (z**2).sum(axis=0)
            bad = 1.0 - q <= _SAT_TOL
            return with_fail(q / np.maximum(1.0 - q, _SAT_TOL), bad)
        sig2 = _estimator_sig2(estimator, means, gdiag, tr_gram, p)
        bad = np.any(sig2 <= 0.0, axis=1)
        return with_fail((means**2 / np.maximum(sig2, 1e-300)).sum(axis=1), bad)

    onesided = False
    base = cone
    if isinstance(cone, _cones.Intersection):
        nonneg = [c for c in cone.members if isinstance(c, _cones.NonNegOrthant)]
        rest = [c for c in cone.members if not isinstance(c, (_cones.NonNegOrthant, _cones.FullSpace))]
        if len(rest) == 1 and nonneg:
            onesided = True
            base = rest[0]
        elif not rest and nonneg:
            onesided = True
            base = _cones.NonNegOrthant(p)

    if isinstance(base, _cones.Coordinate):
        j = base.index
        val = means[:, j]
        if onesided:
            val = np.maximum(val, 0.0)
        if estimator == "pooled":
            sig2 = _estimator_sig2("pooled", means, gdiag, tr_gram, p)[:, 0]
        else:
            sig2 = gdiag[j] - means[:, j] ** 2
        bad = sig2 <= 0.0
        return with_fail(val**2 / np.maximum(sig2, 1e-300), bad)

    if isinstance(base, _cones.KSparse):
        k = base.k
        if estimator == "full" and k >= 2:
            if onesided:
                return None
            gram = x.T @ x / n
            q, _ = stepwise_gram_batch(gram, means, k)
            bad = 1.0 - q <= _SAT_TOL
            return with_fail(q / np.maximum(1.0 - q, _SAT_TOL), bad)
        num = np.maximum(means, 0.0) if onesided else means
        if estimator == "pooled":
            sig2 = _estimator_sig2("pooled", means, gdiag, tr_gram, p)
            bad = sig2[:, 0] <= 0.0
            ratios = num**2 / np.maximum(sig2, 1e-300)
        else:
            sig2 = gdiag[None, :] - means**2
            bad = np.any(sig2 <= 0.0, axis=1)
            ratios = num**2 / np.maximum(sig2, 1e-300)
        return with_fail(_topk_sum(ratios, k), bad)

    if isinstance(base, _cones.NonNegOrthant):
        if estimator == "full":
            return None
        sig2 = _estimator_sig2(estimator, means, gdiag, tr_gram, p)
        bad = np.any(sig2 <= 0.0, axis=1)
        num = np.maximum(means, 0.0)
        return with_fail((num**2 / np.maximum(sig2, 1e-300)).sum(axis=1), bad)

    if isinstance(base, _cones.FiniteDirections) and not onesided:
        dirs = base.directions
        proj = means @ dirs.T  # (M, r)
        if estimator == "full":
            gram = x.T @ x / n
            fixed = np.einsum("rp,pq,rq->r", dirs, gram, dirs)
            quad = fixed[None, :] - proj**2
        elif estimator == "diagonal":
            sig2 = gdiag[None, :] - means**2
            quad = sig2 @ (dirs.T**2)
        else:
            pool = _estimator_sig2("pooled", means, gdiag, tr_gram, p)[:, 0]
            quad = pool[:, None] * (dirs**2).sum(axis=1)[None, :]
        pos = np.maximum(proj, 0.0)
        bad = np.any((quad <= 0.0) & (pos > 0.0), axis=1)
        vals = np.where(quad > 0.0, pos / np.sqrt(np.maximum(quad, 1e-300)), 0.0)
        return with_fail(np.max(vals, axis=1) ** 2, bad)

    return None
