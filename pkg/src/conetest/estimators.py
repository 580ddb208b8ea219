"""Sample moment estimators: mean, covariance (full / diagonal / pooled), Gram matrix.

All covariance estimators use divisor n, not n-1. This matches the definition
the rest of the package is calibrated against; the randomization test is
scale-invariant to the choice as long as it is applied consistently.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import CsvFormatError, DegenerateInputError

FULL = "full"
DIAGONAL = "diagonal"
POOLED = "pooled"

DEFAULT_RANK_TOL = 1e-10


@dataclass(frozen=True)
class DataMatrix:
    """n x p observation matrix; rows are observations, columns are variables."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2:
            raise DegenerateInputError(f"data matrix must be 2-D, got shape {v.shape}")
        n, p = v.shape
        if n < 2:
            raise DegenerateInputError(f"need at least 2 observations, got n={n}")
        if p < 1:
            raise DegenerateInputError("need at least 1 variable")
        if not np.all(np.isfinite(v)):
            raise DegenerateInputError("data matrix contains non-finite entries")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    @classmethod
    def from_csv(cls, path, header: bool = False) -> "DataMatrix":
        """Load one observation per row. Malformed cells raise CsvFormatError
        with 1-based row/column coordinates."""
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for i, rec in enumerate(reader, start=1):
                if header and i == 1:
                    continue
                if not rec or all(c.strip() == "" for c in rec):
                    continue
                parsed = []
                for j, cell in enumerate(rec, start=1):
                    try:
                        parsed.append(float(cell))
                    except ValueError:
                        raise CsvFormatError(
                            f"{path}: cannot parse cell at row {i}, column {j}: {cell!r}"
                        ) from None
                rows.append(parsed)
        if not rows:
            raise CsvFormatError(f"{path}: no data rows")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise CsvFormatError(f"{path}: ragged rows (widths {sorted(widths)})")
        return cls(np.array(rows, dtype=float))


@dataclass(frozen=True)
class CovEstimate:
    """Covariance estimate with a structure tag driving downstream dispatch.

    zero_variance_columns flags exactly-constant columns; the diagonal
    closed-form statistic refuses such estimates.
    """

    matrix: np.ndarray
    structure: str = FULL
    rank_tolerance: float = DEFAULT_RANK_TOL
    zero_variance_columns: tuple = field(default=())

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DegenerateInputError(f"covariance must be square, got shape {m.shape}")
        scale = np.max(np.abs(m)) or 1.0
        if np.max(np.abs(m - m.T)) > 1e-12 * scale:
            raise DegenerateInputError("covariance matrix is not symmetric")
        if self.structure not in (FULL, DIAGONAL, POOLED):
            raise ValueError(f"unknown covariance structure {self.structure!r}")
        if self.structure in (DIAGONAL, POOLED) and np.any(m - np.diag(np.diag(m))):
            raise DegenerateInputError(f"{self.structure} estimate has nonzero off-diagonals")
        object.__setattr__(self, "matrix", m)

    @property
    def p(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_diagonal(self) -> bool:
        return self.structure in (DIAGONAL, POOLED)

    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix)

    def validate_psd(self):
        """Check positive semidefiniteness within rank_tolerance."""
        w = np.linalg.eigvalsh(self.matrix)
        top = max(w[-1], 0.0)
        if w[0] < -self.rank_tolerance * max(top, 1.0):
            raise DegenerateInputError(
                f"covariance not PSD within tolerance (min eig {w[0]:.3e})"
            )
        return self


def _values(x) -> np.ndarray:
    if isinstance(x, DataMatrix):
        return x.values
    return DataMatrix(np.asarray(x, dtype=float)).values


def as_cov(s, rank_tolerance: float = DEFAULT_RANK_TOL) -> CovEstimate:
    """Coerce a raw matrix to a CovEstimate; exact-diagonal matrices get the
    diagonal tag so closed-form dispatch applies."""
    if isinstance(s, CovEstimate):
        return s
    m = np.asarray(s, dtype=float)
    structure = DIAGONAL if m.ndim == 2 and not np.any(m - np.diag(np.diag(m))) else FULL
    return CovEstimate(m, structure=structure, rank_tolerance=rank_tolerance)


def sample_mean(x) -> np.ndarray:
    """Column means."""
    return _values(x).mean(axis=0)


def sample_covariance(x) -> CovEstimate:
    """(1/n) X' (I - P_iota) X, i.e. centered cross products with divisor n."""
    v = _values(x)
    n = v.shape[0]
    c = v - v.mean(axis=0)
    mat = c.T @ c / n
    mat = (mat + mat.T) / 2.0
    zero = tuple(int(j) for j in np.flatnonzero(np.diag(mat) == 0.0))
    return CovEstimate(mat, structure=FULL, zero_variance_columns=zero)


def diagonal_covariance(x) -> CovEstimate:
    """Diagonal of the sample covariance; off-diagonals exactly zero."""
    full = sample_covariance(x)
    d = np.diag(full.matrix).copy()
    return CovEstimate(
        np.diag(d), structure=DIAGONAL, zero_variance_columns=full.zero_variance_columns
    )


def pooled_covariance(x) -> CovEstimate:
    """(tr(Sigma-hat)/p) * I."""
    full = sample_covariance(x)
    p = full.p
    scale = np.trace(full.matrix) / p
    zero = tuple(range(p)) if scale == 0.0 else ()
    return CovEstimate(scale * np.eye(p), structure=POOLED, zero_variance_columns=zero)


def gram_matrix(x) -> np.ndarray:
    """X'X / n. Satisfies gram = cov + outer(mean, mean) up to roundoff."""
    v = _values(x)
    g = v.T @ v / v.shape[0]
    return (g + g.T) / 2.0


ESTIMATORS = {
    FULL: sample_covariance,
    DIAGONAL: diagonal_covariance,
    POOLED: pooled_covariance,
}


def covariance_estimator(choice):
    """Resolve an estimator choice (name or callable) to a callable X -> CovEstimate."""
    if callable(choice):
        return choice
    try:
        return ESTIMATORS[choice]
    except KeyError:
        raise ValueError(
            f"unknown estimator {choice!r}; expected one of {sorted(ESTIMATORS)}"
        ) from None
