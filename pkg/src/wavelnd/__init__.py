"""Gaussian field solving the linear stochastic wave equation with Riesz-kernel or
white noise: covariance engines, exact sampling, local nondeterminism and
modulus-of-continuity checks."""

from .field import (
    CovarianceCache,
    DomainBox,
    FieldError,
    FieldSpec,
    SpacetimePoint,
    covariance,
    covariance_direct_k1,
    covariance_k1_closed,
    covariance_matrix,
    covariance_spectral,
    gamma_modulus,
    l1_distance,
    riesz_spectral_constant,
    sandwich_scan,
    sigma_from_covariance,
    sigma_metric,
    variance,
)
from .lnd import (
    LndConfig,
    LndError,
    LndReport,
    SphereRule,
    conditional_variance_points,
    proof_grid_conditional_check,
    sectorial_bound,
    sectorial_check_k1,
    slnd_integral,
    slnd_ratio_scan,
)
from .modulus import (
    ModulusConfig,
    ModulusError,
    ModulusReport,
    entropy_scan,
    epsilon_schedule,
    estimate_J,
    modulus_experiment,
)
from .sampler import BudgetError, FieldSample, GridSpec, build_grid, sample_field

__version__ = "0.1.0"
