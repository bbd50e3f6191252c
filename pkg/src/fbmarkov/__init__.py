"""Markovian simulation of long-memory Gaussian processes.

Kernels that are Laplace transforms of a positive measure (including the
memory part of fractional Brownian motion) are simulated as weighted sums
over a finite bank of Ornstein-Uhlenbeck processes.  The bank is built from
a geometric partition of the spectral measure, advanced by an exact or
Euler one-step rule, certified against closed-form covariance oracles, and
exercised by an ergodic time-averaging harness.
"""

from .engine import (
    MarkovState,
    PathSample,
    StepKernel,
    init_state,
    precompute_step_kernel,
    read_output,
    replica_seeds,
    simulate_ensemble,
    simulate_path,
    step_euler,
    step_exact,
)
from .ergodic import (
    ErgodicResult,
    PhiSpec,
    ergodic_experiment,
    gaussian_expectation,
    make_phi,
    time_average,
)
from .errors import (
    CapacityError,
    DimensionError,
    DomainError,
    FbmkError,
    NotSquareIntegrableError,
    NumericalError,
    ParameterError,
    StabilityError,
    UnsupportedMeasureError,
)
from .kernel import (
    AdmissibilityReport,
    AtomicMeasure,
    HurstKernelParams,
    PowerLawMeasure,
    SpectralMeasure,
    check_admissibility,
    kernel_from_measure,
    l2_norm,
    parse_measure,
    power_kernel_eval,
    spectral_density,
)
from .oracle import (
    CovarianceGrid,
    ErrorReport,
    approx_covariance_closed_form,
    approx_covariance_grid,
    cholesky_gaussian_vector,
    cross_covariance_exact,
    fbm_covariance,
    fbm_covariance_grid,
    memory_covariance_exact,
    memory_covariance_grid,
    memory_variance_closed_form,
    sup_l2_error,
    tune_partition_nodes,
)
from .partition import (
    GeometricPartition,
    build_geometric_partition,
    compute_weights,
    partition_cardinality,
    partition_for_measure,
)

__version__ = "0.1.0"
