"""Conic test statistics for high-dimensional mean testing.

The statistic generalizes the Wald statistic by restricting the maximizing
weights to a cone of interest; reflection randomization supplies exact
finite-sample critical values, and the simulation harness reproduces
rejection-rate tables under equicorrelated Gaussian data.
"""

from .cones import (
    Cone,
    Coordinate,
    FiniteDirections,
    FullSpace,
    Intersection,
    KSparse,
    LassoCone,
    NonNegOrthant,
    parse_cone,
)
from .errors import (
    ConeSpecError,
    ConvergenceError,
    CsvFormatError,
    DegenerateInputError,
    ExistenceError,
    GridLookupError,
    SubsetBudgetError,
    UnsupportedConeOperation,
)
from .estimators import (
    CovEstimate,
    DataMatrix,
    diagonal_covariance,
    gram_matrix,
    pooled_covariance,
    sample_covariance,
    sample_mean,
)
from .inference import (
    CompositeTestOutcome,
    RandomizationOutcome,
    ScreeningResult,
    draw_reflections,
    f_quantile,
    hotelling_wald_test,
    power_enhancement_test,
    randomization_test,
    screening_statistic,
)
from .simulation import (
    SimConfig,
    SimResult,
    TestResult,
    TestSpec,
    b_lookup,
    equicorr_factor,
    generate_data,
    grid_configs,
    mu_vector,
    parse_test_spec,
    result_rows,
    run_experiment,
)
from .solvers import (
    SolveOutcome,
    SolverOptions,
    bss_exhaustive,
    bss_heuristic,
    lasso_cone_solve,
    lasso_constrained,
    nonneg_quadratic,
    regression_solve,
)
from .statistic import (
    ConicStatResult,
    ExistenceReport,
    conic_statistic,
    existence_check,
    geometric_decomposition,
    k_sparse_diag_statistic,
    regression_statistic,
    wald_statistic,
)

__version__ = "0.1.0"
