"""Recovery of multiple nonnegative time series from temporal aggregates.

Each series is observed only through sums over runs of consecutive periods.
The recovery factors the unknown matrix as a low-rank nonnegative product and
alternates factor updates with an exact projection onto the set of matrices
consistent with the observed sums; a variant additionally rewards lag-1
autocorrelation through closed-form per-column projections.
"""

from .autocorr import (
    ColumnProjector,
    NumericalError,
    autocorr_value,
    build_column_projector,
    delta_rho_eigenvalues,
    delta_rho_matrix,
    lambda_heuristic,
    penalized_project_column,
    qcqp_oracle,
    solve_shifted,
)
from .datagen import (
    GenerationError,
    SyntheticSpec,
    estimate_rho,
    matern_kernel,
    matern_mixture,
    synthesize_with_history,
)
from .measurement import (
    AggregationScheme,
    ObservationVector,
    Segment,
    apply_scheme,
    interpolation_baseline,
    periodic_scheme,
    random_scheme,
)
from .nmf import (
    DegenerateFactorWarning,
    kkt_residual,
    update_h_hals,
    update_h_nesterov,
    update_w_hals,
    update_w_nesterov,
)
from .projection import project_data, project_simplex
from .recovery import (
    PenaltyConfig,
    RankSweepResult,
    RecoveryOptions,
    RecoveryReport,
    normalized_error,
    rank_sweep,
    recover,
    recover_penalized,
)
from .sweep import ExperimentMatrix, run_sweep

__version__ = "0.1.0"

__all__ = [
    "AggregationScheme",
    "ColumnProjector",
    "DegenerateFactorWarning",
    "ExperimentMatrix",
    "GenerationError",
    "NumericalError",
    "ObservationVector",
    "PenaltyConfig",
    "RankSweepResult",
    "RecoveryOptions",
    "RecoveryReport",
    "Segment",
    "SyntheticSpec",
    "apply_scheme",
    "autocorr_value",
    "build_column_projector",
    "delta_rho_eigenvalues",
    "delta_rho_matrix",
    "estimate_rho",
    "interpolation_baseline",
    "kkt_residual",
    "lambda_heuristic",
    "matern_kernel",
    "matern_mixture",
    "normalized_error",
    "penalized_project_column",
    "periodic_scheme",
    "project_data",
    "project_simplex",
    "qcqp_oracle",
    "random_scheme",
    "rank_sweep",
    "recover",
    "recover_penalized",
    "run_sweep",
    "solve_shifted",
    "synthesize_with_history",
    "update_h_hals",
    "update_h_nesterov",
    "update_w_hals",
    "update_w_nesterov",
]
