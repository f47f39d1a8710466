class NumericsError(ValueError):
    """Invalid input or failed numerical kernel."""


class QuadratureError(NumericsError):
    """Quadrature failed to reach its tolerance.

    Carries the best estimate and error bound reached, or the offending abscissa
    when the integrand produced a non-finite value.
    """

    def __init__(self, message, estimate=None, error_bound=None, abscissa=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound
        self.abscissa = abscissa


class NotPSDError(NumericsError):
    """Matrix could not be factored even at the jitter ceiling."""

    def __init__(self, message, min_pivot=None):
        super().__init__(message)
        self.min_pivot = min_pivot
