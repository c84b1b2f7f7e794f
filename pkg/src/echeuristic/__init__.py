"""Expected Euler characteristic approximation for suprema of Gaussian fields.

Submodules:

- :mod:`.covariance`: closed-form stationary covariances and their derivatives
- :mod:`.ec_heuristic`: Lipschitz-Killing curvatures and the expected-EC tail
- :mod:`.critical_variance`: the critical variance that sets the error exponent
- :mod:`.field_sim`: seeded grid samplers and excursion-set Euler characteristics
- :mod:`.experiment`: paired Monte Carlo error estimates and exponent checks
"""

from .config import ConfigError, ExperimentConfig, load_config, parse_config
from .covariance import (
    CovarianceModel,
    IsotropicModel,
    cosine_mixture,
    latitude_circle,
    normalize_second_moment,
    squared_exponential,
)
from .critical_variance import (
    CriticalVarianceReport,
    FiniteKLModel,
    sigma_critical_finite_kl,
    sigma_critical_interval,
    sigma_isotropic_convex,
    sigma_monotone_shortcut,
)
from .ec_heuristic import ParameterSpace, box, convex_planar, ec_approximation, ec_density, finite_kl_bound, interval
from .experiment import (
    InsufficientSignal,
    PairedDiffEstimate,
    ValidationReport,
    fit_decay_exponent,
    mean_ec_vs_formula,
    paired_diff,
    validate_theorem,
)
from .field_sim import SamplerError, build_sampler_1d, build_sampler_2d

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ExperimentConfig", "load_config", "parse_config",
    "CovarianceModel", "IsotropicModel", "cosine_mixture", "latitude_circle",
    "normalize_second_moment", "squared_exponential",
    "CriticalVarianceReport", "FiniteKLModel", "sigma_critical_finite_kl", "sigma_critical_interval",
    "sigma_isotropic_convex", "sigma_monotone_shortcut",
    "ParameterSpace", "box", "convex_planar", "ec_approximation", "ec_density", "finite_kl_bound", "interval",
    "InsufficientSignal", "PairedDiffEstimate", "ValidationReport", "fit_decay_exponent",
    "mean_ec_vs_formula", "paired_diff", "validate_theorem",
    "SamplerError", "build_sampler_1d", "build_sampler_2d",
]
