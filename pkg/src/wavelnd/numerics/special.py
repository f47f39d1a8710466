"""Bessel functions of the orders needed for radial reduction in dimensions 1-3."""

import numpy as np
from scipy import special as sp

from .errors import NumericsError

SUPPORTED_ORDERS = (-0.5, 0.0, 0.5)


def bessel_j(order, x):
    """J_order(x) for order in {-1/2, 0, 1/2} and x >= 0.

    Half-integer orders use their elementary closed forms; J_0 is the Cephes
    implementation in scipy.
    """
    order = float(order)
    if order not in SUPPORTED_ORDERS:
        raise NumericsError(
            f"Bessel order {order} unsupported; only {SUPPORTED_ORDERS} (k <= 3)")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise NumericsError("bessel_j requires x >= 0")
    if order == 0.0:
        return sp.j0(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        amp = np.sqrt(2.0 / (np.pi * x))
        if order == 0.5:
            return np.where(x == 0, 0.0, amp * np.sin(x))
        return amp * np.cos(x)


def angular_factor(k: int, x):
    """Integral of cos(x * w_1) over the unit sphere S^{k-1}.

    Equals (2 pi)^{k/2} x^{1-k/2} J_{k/2-1}(x) for x > 0 and the sphere area
    2 pi^{k/2} / Gamma(k/2) at x = 0.
    """
    x = np.asarray(x, dtype=float)
    if k == 1:
        # sqrt(2 pi x) J_{-1/2}(x) == 2 cos x, including x = 0
        return 2.0 * np.cos(x)
    if k == 2:
        return 2.0 * np.pi * bessel_j(0.0, x)
    if k == 3:
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (2.0 * np.pi) ** 1.5 * bessel_j(0.5, x) / np.sqrt(x)
        # sin(x)/x limit at the origin
        return np.where(x < 1e-8, 4.0 * np.pi * (1.0 - x * x / 6.0), val)
    raise NumericsError(f"spatial dimension k={k} unsupported (k <= 3)")


def sphere_area(k: int) -> float:
    """Surface measure of S^{k-1}."""
    return float(2.0 * np.pi ** (k / 2.0) / sp.gamma(k / 2.0))
