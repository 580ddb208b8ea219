"""Inference: reflection-randomization critical values, the Hotelling/Wald
test, the screening statistic, and the power-enhancement composite.

Randomization p-values use the counting convention
p = #{i : T_i >= T_observed} / M with the identity reflection always included,
rejecting when p <= alpha. Under sign-symmetric errors and a true zero mean
this is exact at every sample size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import stats as _sstats

from . import batched as _batched
from . import solvers as _solvers
from .errors import DegenerateInputError, ExistenceError
from .estimators import (
    DataMatrix,
    covariance_estimator,
    sample_covariance,
    sample_mean,
)
from .rng import child_rng
from .statistic import conic_statistic

_REFLECTION_STREAM = 0
_COIN_STREAM = 1


@dataclass(frozen=True)
class RandomizationOutcome:
    statistic: float
    resamples: int
    p_value: float
    critical_value: float
    reject: bool
    seed: int
    failed_resamples: int = 0


class ScreeningResult(NamedTuple):
    value: float
    selected: tuple
    delta: float


@dataclass(frozen=True)
class CompositeTestOutcome:
    initial_reject: bool
    screening_value: float
    screening_reject: bool
    combined_reject: bool
    fallback_randomized: bool


def _data_values(x) -> np.ndarray:
    if isinstance(x, DataMatrix):
        return x.values
    return DataMatrix(np.asarray(x, dtype=float)).values


def draw_reflections(n: int, resamples: int, rng: np.random.Generator) -> np.ndarray:
    """Sign matrix with one reflection per row; row 0 is the identity.

    The remaining rows are distinct non-identity sign patterns drawn without
    replacement. When the group is no larger than the request, all 2^n
    reflections are enumerated instead.
    """
    if resamples < 2:
        raise ValueError("need at least 2 resamples (identity plus one reflection)")
    words = (n + 63) // 64
    if n <= 30 and (1 << n) <= resamples:
        packed = np.arange(1 << n, dtype=np.uint64)[:, None]
    else:
        need = resamples - 1
        rows = np.zeros((0, words), dtype=np.uint64)
        while rows.shape[0] < need:
            batch = rng.integers(0, 2**64, size=(need + need // 2 + 16, words), dtype=np.uint64)
            if n % 64:
                batch[:, -1] &= (np.uint64(1) << np.uint64(n % 64)) - np.uint64(1)
            rows = np.unique(np.concatenate([rows, batch]), axis=0)
            rows = rows[np.any(rows != 0, axis=1)]
        packed = np.concatenate([np.zeros((1, words), dtype=np.uint64), rows[:need]])
    bits = np.empty((packed.shape[0], n), dtype=np.uint8)
    for j in range(n):
        bits[:, j] = (packed[:, j // 64] >> np.uint64(j % 64)) & np.uint64(1)
    return 1.0 - 2.0 * bits.astype(float)


def _generic_resample_stats(x, cone, estimator, signs, opts):
    """Per-resample loop fallback: recompute mean and covariance and call the
    library statistic for each reflected data set."""
    est = covariance_estimator(estimator)
    mcount = signs.shape[0]
    stats = np.zeros(mcount)
    failed = np.zeros(mcount, dtype=bool)
    for i in range(mcount):
        xi = signs[i][:, None] * x
        m = xi.mean(axis=0)
        cov = est(xi)
        try:
            stats[i] = conic_statistic(m, cov, cone, opts).statistic
        except (ExistenceError, DegenerateInputError):
            if i == 0:
                raise
            failed[i] = True
            stats[i] = 0.0
    return stats, failed


def randomization_test(
    x,
    cone,
    estimator="full",
    alpha: float = 0.05,
    resamples: int = 1000,
    seed: int = 0,
    opts: _solvers.SolverOptions | None = None,
) -> RandomizationOutcome:
    """Reflection-randomization test of a zero mean against the cone alternative.

    Both the mean and the covariance are recomputed on every reflected data
    set. Closed-form statistics evaluate vectorized across resamples; the
    sparse full-covariance statistic beyond the exhaustive budget uses forward
    stepwise, applied identically to the observed and resampled data (so size
    control is unaffected). An existence failure on the observed data
    propagates; failures on resamples score 0, the conservative choice, and
    are counted in the outcome.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    x = _data_values(x)
    n = x.shape[0]
    opts = opts or _solvers.DEFAULT_OPTIONS
    rng = child_rng(seed, _REFLECTION_STREAM)
    signs = draw_reflections(n, resamples, rng)
    mcount = signs.shape[0]
    fast = None
    if isinstance(estimator, str) and not _needs_exact_small_path(x, cone, estimator, opts):
        fast = _batched.batched_conic_statistics(x, cone, estimator, signs, opts)
    if fast is None:
        stats, failed = _generic_resample_stats(x, cone, estimator, signs, opts)
    else:
        stats, failed = fast
        if failed[0]:
            raise ExistenceError("statistic degenerate on the observed data")
    observed = float(stats[0])
    p_value = float(np.mean(stats >= observed))
    top = max(1, math.ceil(alpha * mcount))
    critical_value = float(np.partition(stats, mcount - top)[mcount - top])
    return RandomizationOutcome(
        statistic=observed,
        resamples=mcount,
        p_value=p_value,
        critical_value=critical_value,
        reject=bool(p_value <= alpha),
        seed=seed,
        failed_resamples=int(failed.sum()),
    )


def _needs_exact_small_path(x, cone, estimator, opts):
    """Sparse cones with a full covariance use exact enumeration when it fits
    the budget, matching what conic_statistic would compute point-wise."""
    from . import cones as _cones

    base = cone
    if isinstance(cone, _cones.Intersection):
        rest = [c for c in cone.members if not isinstance(c, (_cones.NonNegOrthant, _cones.FullSpace))]
        if len(rest) == 1:
            base = rest[0]
    if isinstance(base, _cones.KSparse) and base.k >= 2 and estimator == "full":
        return _solvers.subset_total(x.shape[1], base.k) <= opts.exhaustive_limit
    return False


def f_quantile(d1: int, d2: int, q: float) -> float:
    """Inverse CDF of the F distribution (regularized incomplete beta inversion)."""
    if d1 < 1 or d2 < 1:
        raise ValueError("degrees of freedom must be positive")
    if not 0.0 < q < 1.0:
        raise ValueError("quantile level must be in (0, 1)")
    return float(_sstats.f.ppf(q, d1, d2))


def hotelling_wald_test(x, alpha: float = 0.05) -> bool:
    """Reject when n m' Sigma^-1 m exceeds pn/(n-p) times the F(p, n-p)
    quantile; with the divisor-n covariance this is the exact Hotelling test."""
    x = _data_values(x)
    n, p = x.shape
    if p >= n:
        raise DegenerateInputError(f"Wald test undefined for p={p} >= n={n}")
    m = sample_mean(x)
    cov = sample_covariance(x)
    try:
        low = np.linalg.cholesky(cov.matrix)
    except np.linalg.LinAlgError:
        raise ExistenceError("sample covariance singular; Wald test undefined") from None
    z = np.linalg.solve(low, m)
    wald = n * float(z @ z)
    crit = p * n / (n - p) * f_quantile(p, n - p, 1.0 - alpha)
    return bool(wald > crit)


def screening_statistic(x) -> ScreeningResult:
    """Thresholded diagonal quadratic form.

    The threshold delta = loglog(n) * sqrt(log p) applies on the standardized
    scale: coordinate j enters when sqrt(n)|m_j| > sigma_j * delta. The value
    is sqrt(p) times the sum of m_j^2/sigma_j^2 over entrants.
    """
    x = _data_values(x)
    n, p = x.shape
    if n <= math.e:
        raise DegenerateInputError(f"threshold undefined for n={n} (needs n >= 3)")
    delta = math.log(math.log(n)) * math.sqrt(math.log(p))
    m = sample_mean(x)
    sig2 = np.diag(sample_covariance(x).matrix)
    if np.any(sig2 <= 0.0):
        bad = tuple(int(j) for j in np.flatnonzero(sig2 <= 0.0))
        raise DegenerateInputError(f"zero variance at columns {bad}")
    sig = np.sqrt(sig2)
    selected = tuple(int(j) for j in np.flatnonzero(math.sqrt(n) * np.abs(m) > sig * delta))
    value = math.sqrt(p) * float(np.sum(m[list(selected)] ** 2 / sig2[list(selected)])) if selected else 0.0
    return ScreeningResult(value=value, selected=selected, delta=delta)


def power_enhancement_test(x, alpha: float = 0.05, seed: int = 0) -> CompositeTestOutcome:
    """Initial Wald test (alpha-coin when p >= n) combined with the
    zero-critical-value screening test; rejects when either does."""
    x = _data_values(x)
    n, p = x.shape
    if p < n:
        initial = hotelling_wald_test(x, alpha)
        fallback = False
    else:
        initial = bool(child_rng(seed, _COIN_STREAM).random() < alpha)
        fallback = True
    screen = screening_statistic(x)
    screening_reject = screen.value > 0.0
    return CompositeTestOutcome(
        initial_reject=bool(initial),
        screening_value=screen.value,
        screening_reject=bool(screening_reject),
        combined_reject=bool(initial or screening_reject),
        fallback_randomized=fallback,
    )
