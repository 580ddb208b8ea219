"""Exception types shared across the package.

The CLI maps these onto exit codes: usage/IO problems exit 1, statistical
degeneracy (a failed existence condition) exits 2.
"""

from __future__ import annotations


class DegenerateInputError(ValueError):
    """Input is structurally unusable (n < 2, zero variance on a needed diagonal, ...)."""


class ExistenceError(RuntimeError):
    """The restricted eigenvalue condition fails: the statistic is unbounded.

    Carries the :class:`~conetest.statistic.ExistenceReport` that triggered it.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SubsetBudgetError(RuntimeError):
    """Exhaustive subset enumeration would exceed the configured budget."""


class ConvergenceError(RuntimeError):
    """An iterative solver did not reach its tolerance within max_iterations."""


class ConeSpecError(ValueError):
    """A cone mini-language string could not be parsed; reports the bad token."""


class CsvFormatError(ValueError):
    """A CSV cell failed to parse; reports 1-based row/column coordinates."""


class GridLookupError(LookupError):
    """Requested (n, s) pair is outside the built-in signal magnitude grid."""


class UnsupportedConeOperation(NotImplementedError):
    """The requested operation is not defined for this cone kind."""
