"""Shared numerical kernels: quadrature, Bessel functions, PSD factorization."""

from .errors import NotPSDError, NumericsError, QuadratureError
from .linalg import (
    JitterPolicy,
    PsdFactorization,
    factor_psd,
    schur_conditional_variance,
)
from .quadrature import (
    DEFAULT_QUAD,
    QuadSpec,
    TailPolicy,
    integrate_adaptive,
    integrate_oscillatory_tail,
    trig_power_tail,
)
from .special import angular_factor, bessel_j, sphere_area

__all__ = [
    "NotPSDError", "NumericsError", "QuadratureError",
    "JitterPolicy", "PsdFactorization", "factor_psd", "schur_conditional_variance",
    "DEFAULT_QUAD", "QuadSpec", "TailPolicy", "integrate_adaptive",
    "integrate_oscillatory_tail", "trig_power_tail",
    "angular_factor", "bessel_j", "sphere_area",
]
