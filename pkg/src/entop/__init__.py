"""Blurred transfer operators of stochastic dynamics from sampled pairs.

The package estimates the one-step transition kernel of a stochastic
dynamical system from transition samples ``(x_i, y_i)``, with an
entropic blur at scale ``epsilon`` replacing histogram binning. The
resulting operator acts on functions over the samples; its dominant
eigenpairs (or singular triples) expose slow coordinates, cycles, and
metastable structure, and extend to unseen points.

Typical entry points:

- :class:`EntropicTransferOperator` -- estimator-style fit/transform.
- :func:`build_operator` + :func:`top_eigenpairs` -- the explicit route.
- :func:`sweep` -- spectra across an epsilon grid with warm starts.
- ``entop`` console script -- file-driven runs of the same machinery.
"""

from .errors import (
    AllocationRefusedError,
    ConfigError,
    DimensionMismatchError,
    EigensolverError,
    EmptyDataError,
    EntopError,
    InvalidEpsilonError,
    NonConvergenceError,
    SmallEigenvalueError,
)
from .cloud import CostSpec, PointCloud, read_csv_table, squared_euclidean, squared_torus
from .sinkhorn import (
    DualPotentials,
    EntropicKernel,
    MarginalResiduals,
    SolverOptions,
    kernel_evaluate,
    kernel_matrix,
    solve_self_transport,
    solve_sinkhorn,
)
from .operator import (
    TransferOperatorEstimate,
    TransitionData,
    apply,
    apply_adjoint,
    build_operator,
    operator_kernel_evaluate,
)
from .spectral import (
    Spectrum,
    SweepEntry,
    SweepResult,
    spectral_embedding,
    sweep,
    top_eigenpairs,
    top_singular_triples,
)
from .oos import (
    CONFIDENCE_MASS_SHARE,
    EIGENVALUE_FLOOR,
    ExtendedFunction,
    extend_eigenfunction,
    extend_embedding,
)
from .synth import (
    EmbeddedRingSpec,
    TorusShiftSpec,
    sample_embedded_ring,
    sample_torus_shift,
    simulate_torus_walk,
    true_kernel_torus,
    wrapped_gaussian_density,
)
from .baselines import (
    BoxPartition,
    CounterexampleResult,
    QuantileAssignment,
    UlamOperator,
    build_ulam,
    double_blur_error,
    ot_1d_quantile,
    sample_two_point_system,
    single_blur_counterexample,
    single_blur_error_mc,
)
from .metrics import (
    KernelDistanceReport,
    SlopeFit,
    TorusKernelProxy,
    aggregate_reports,
    circular_correlation,
    convergence_study,
    dimension_study,
    empirical_population_distance,
    fit_loglog_slope,
    fourier_mode_match,
    l2_distance_grid,
    l2_distance_mc,
    phase_of_subdominant,
    population_kernel_torus,
    read_report_csv,
    t_vs_regularized_distance,
    write_report_csv,
)
from .estimator import EntropicTransferOperator
from .config import ExperimentConfig, RunArtifact

__version__ = "0.1.0"

__all__ = [
    "EntopError",
    "InvalidEpsilonError",
    "DimensionMismatchError",
    "AllocationRefusedError",
    "NonConvergenceError",
    "EigensolverError",
    "SmallEigenvalueError",
    "EmptyDataError",
    "ConfigError",
    "PointCloud",
    "CostSpec",
    "squared_euclidean",
    "squared_torus",
    "read_csv_table",
    "SolverOptions",
    "MarginalResiduals",
    "DualPotentials",
    "EntropicKernel",
    "solve_sinkhorn",
    "solve_self_transport",
    "kernel_evaluate",
    "kernel_matrix",
    "TransitionData",
    "TransferOperatorEstimate",
    "build_operator",
    "apply",
    "apply_adjoint",
    "operator_kernel_evaluate",
    "Spectrum",
    "SweepEntry",
    "SweepResult",
    "top_eigenpairs",
    "top_singular_triples",
    "sweep",
    "spectral_embedding",
    "ExtendedFunction",
    "extend_eigenfunction",
    "extend_embedding",
    "EIGENVALUE_FLOOR",
    "CONFIDENCE_MASS_SHARE",
    "TorusShiftSpec",
    "EmbeddedRingSpec",
    "sample_torus_shift",
    "sample_embedded_ring",
    "simulate_torus_walk",
    "true_kernel_torus",
    "wrapped_gaussian_density",
    "BoxPartition",
    "UlamOperator",
    "build_ulam",
    "QuantileAssignment",
    "ot_1d_quantile",
    "CounterexampleResult",
    "single_blur_counterexample",
    "single_blur_error_mc",
    "double_blur_error",
    "sample_two_point_system",
    "KernelDistanceReport",
    "TorusKernelProxy",
    "SlopeFit",
    "l2_distance_grid",
    "l2_distance_mc",
    "population_kernel_torus",
    "empirical_population_distance",
    "t_vs_regularized_distance",
    "convergence_study",
    "dimension_study",
    "aggregate_reports",
    "fit_loglog_slope",
    "phase_of_subdominant",
    "fourier_mode_match",
    "circular_correlation",
    "write_report_csv",
    "read_report_csv",
    "EntropicTransferOperator",
    "ExperimentConfig",
    "RunArtifact",
    "__version__",
]
