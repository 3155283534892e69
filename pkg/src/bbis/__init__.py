"""Black-box importance weights for arbitrary samples.

The main entry point is :func:`med_weights`, which needs only an unnormalized
log density at each sample. :func:`ksd_weights` (needs the score) and
:func:`kde_weights` are provided as competitors, together with energy-distance
metrics, test targets, MCMC samplers and a seeded experiment harness.
"""

__version__ = "0.1.0"

from ._backend import BACKEND, available_backends, kernel_threads, set_kernel_threads
from .core import (
    MahalanobisMetric,
    StandardizationTransform,
    mahalanobis_metric,
    pairwise_sq_dist,
    standardize,
)
from .errors import BBISError, InvalidInputError, NumericalError
from .kde import kde_weights, loo_kde_density, rot_bandwidth, rot_bandwidth_formula
from .ksd import KsdResult, SteinMatrix, ksd_weights, median_heuristic, stein_kernel_matrix
from .med import (
    EnergyMatrix,
    MedConfig,
    MedResult,
    build_energy_matrix,
    low_density_filter,
    low_density_threshold,
    med_weights,
)
from .metrics import (
    Moments,
    WeightedSampleSet,
    energy_distance_full,
    energy_distance_simplified,
    reference_pair_term,
    weighted_moment_errors,
)
from .samplers import ChainRecord, gibbs_mixed_chain, ram_chain, replicate_seed, self_normalized_is
from .simplex import QPConfig, QPResult, minimize_quadratic_on_simplex, project_to_simplex
from .targets import (
    CalibrationProblem,
    DiscreteSpec,
    TargetBundle,
    calibration_target,
    encode_discrete,
    gaussian_target,
    helmert_contrasts,
    logistic_target,
    mixture_target,
)

__all__ = [
    "__version__",
    "BACKEND",
    "available_backends",
    "kernel_threads",
    "set_kernel_threads",
    "MahalanobisMetric",
    "StandardizationTransform",
    "mahalanobis_metric",
    "pairwise_sq_dist",
    "standardize",
    "BBISError",
    "InvalidInputError",
    "NumericalError",
    "kde_weights",
    "loo_kde_density",
    "rot_bandwidth",
    "rot_bandwidth_formula",
    "KsdResult",
    "SteinMatrix",
    "ksd_weights",
    "median_heuristic",
    "stein_kernel_matrix",
    "EnergyMatrix",
    "MedConfig",
    "MedResult",
    "build_energy_matrix",
    "low_density_filter",
    "low_density_threshold",
    "med_weights",
    "Moments",
    "WeightedSampleSet",
    "energy_distance_full",
    "energy_distance_simplified",
    "reference_pair_term",
    "weighted_moment_errors",
    "ChainRecord",
    "gibbs_mixed_chain",
    "ram_chain",
    "replicate_seed",
    "self_normalized_is",
    "QPConfig",
    "QPResult",
    "minimize_quadratic_on_simplex",
    "project_to_simplex",
    "CalibrationProblem",
    "DiscreteSpec",
    "TargetBundle",
    "calibration_target",
    "encode_discrete",
    "gaussian_target",
    "helmert_contrasts",
    "logistic_target",
    "mixture_target",
]
