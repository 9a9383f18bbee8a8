"""Simulation and verification of fractional Wishart eigenvalue processes.

The eigenvalues of ``X(t) = N(t)^T N(t)``, with ``N`` a ``p x n`` matrix of
independent fractional Brownian motions, are simulated exactly on time
grids and compared with their large-dimension limit, the free Poisson law
dilated by ``t^(2H)``.
"""

from .analysis import (
    EmpiricalMeasure,
    GapStats,
    StructureFunction,
    empirical_measure,
    gap_stats,
    inverse_moment_scaling,
    joint_logdensity,
    ks_distance,
    structure_function,
    wasserstein1,
)
from .errors import (
    CirculantEmbeddingError,
    ConfigurationError,
    DomainError,
    FracWishartError,
    NumericalError,
    PreconditionError,
    SummaryFormatError,
    UsageError,
)
from .fbm import TimeGrid, fbm_covariance, increment_autocov, sample_fbm, sample_fbm_paths
from .limit_law import (
    DilatedMP,
    cauchy_transform,
    cst_residual,
    initial_transform,
    mp_density,
    mp_edges,
    pde_residual,
)
from .matrix_process import (
    build_wishart,
    eigh_sorted,
    sample_matrix_fbm,
    spectrum_path,
)
from .mc_harness import EnsembleSummary, SimConfig, load, persist, run_ensemble
from .spectra import (
    drift,
    eig_gradient,
    eig_hessian_diag,
    eig_second_diag,
    mean_drift_comparison,
    mean_drift_integral,
    second_derivative_sum,
)

__version__ = "0.1.0"
