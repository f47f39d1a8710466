"""One-dimensional quadrature: adaptive Gauss-Kronrod, panelled oscillatory tails,
and closed-form tails of power-times-trigonometric integrands."""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import NumericsError, QuadratureError

# Kronrod 21-point rule with embedded 10-point Gauss rule (QUADPACK qk21).
_XK = np.array([
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0,
])
_WK = np.array([
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077958109831074, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

KRONROD_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
KRONROD_WEIGHTS = np.concatenate([_WK[:-1], _WK[::-1]])
# Gauss nodes are the odd-indexed Kronrod nodes (positions 1, 3, ..., 19).
GAUSS_WEIGHTS = np.zeros(21)
GAUSS_WEIGHTS[1:20:2] = np.concatenate([_WG, _WG[::-1]])


@dataclass(frozen=True)
class TailPolicy:
    """Envelope |f(rho)| <= constant * rho**exponent on the tail, and the target
    bound on the neglected remainder."""

    exponent: float
    constant: float = 1.0
    target: float = 1e-10

    def __post_init__(self):
        if not self.exponent < -1:
            raise NumericsError(
                f"tail envelope exponent {self.exponent} >= -1 is not integrable")
        if self.constant <= 0 or self.target <= 0:
            raise NumericsError("tail envelope constant and target must be positive")

    def cutoff(self) -> float:
        """Smallest R with constant * R**(p+1) / |p+1| <= target."""
        p1 = self.exponent + 1.0
        return (self.target * abs(p1) / self.constant) ** (1.0 / p1)

    def remainder(self, R: float) -> float:
        p1 = self.exponent + 1.0
        return self.constant * R ** p1 / abs(p1)


@dataclass(frozen=True)
class QuadSpec:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_subdivisions: int = 2000
    tail: Optional[TailPolicy] = field(default=None)

    def __post_init__(self):
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise NumericsError("quadrature tolerances must be positive")
        if self.max_subdivisions < 1:
            raise NumericsError("max_subdivisions must be >= 1")


DEFAULT_QUAD = QuadSpec()


def _kronrod_panels(f, lo: np.ndarray, hi: np.ndarray):
    """Kronrod estimates and |Kronrod - Gauss| error for a batch of panels."""
    c = 0.5 * (lo + hi)
    h = 0.5 * (hi - lo)
    x = c[:, None] + h[:, None] * KRONROD_NODES[None, :]
    y = np.asarray(f(x.ravel()), dtype=float)
    y = np.broadcast_to(y, (x.size,)).reshape(x.shape) if y.size != x.size else y.reshape(x.shape)
    if not np.all(np.isfinite(y)):
        bad = x[~np.isfinite(y)][0]
        raise QuadratureError(f"integrand is not finite at x={bad!r}", abscissa=float(bad))
    k = h * (y @ KRONROD_WEIGHTS)
    g = h * (y @ GAUSS_WEIGHTS)
    return k, np.abs(k - g)


def integrate_adaptive(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    spec: QuadSpec = DEFAULT_QUAD,
    points: Sequence[float] = (),
) -> float:
    """Adaptive Gauss-Kronrod (10/21) quadrature of ``f`` over [a, b].

    ``f`` is called with a 1-D array of abscissae and must return an array of the
    same shape. Every refinement round bisects, in one batched call to ``f``, all
    panels whose error estimate exceeds their length-proportional share of the
    tolerance. Endpoints are never evaluated, so integrable endpoint singularities
    are allowed. ``points`` lists interior break points (kinks, cusps) that start
    out as panel boundaries.

    Raises
    ------
    QuadratureError
        If the tolerance is not met within ``spec.max_subdivisions`` panels, or if
        ``f`` returns a non-finite value.
    """
    if not a < b:
        raise NumericsError(f"integration limits must satisfy a < b, got [{a}, {b}]")
    edges = np.array(sorted({a, b, *(p for p in points if a < p < b)}), dtype=float)
    lo, hi = edges[:-1], edges[1:]
    length = b - a
    done_q: list = []
    done_e = 0.0
    n_panels = lo.size
    while True:
        q, e = _kronrod_panels(f, lo, hi)
        total = math.fsum(done_q) + math.fsum(q.tolist())
        err = done_e + float(e.sum())
        tol = max(spec.abs_tol, spec.rel_tol * abs(total))
        if err <= tol:
            return math.fsum(done_q + q.tolist())
        keep = e <= 0.5 * tol * (hi - lo) / length
        done_q.extend(q[keep].tolist())
        done_e += float(e[keep].sum())
        lo, hi = lo[~keep], hi[~keep]
        if lo.size == 0:
            # Every panel met its share but the accepted total is still too large.
            return math.fsum(done_q)
        n_panels += lo.size
        if n_panels > spec.max_subdivisions:
            raise QuadratureError(
                f"adaptive quadrature did not converge in {spec.max_subdivisions} panels",
                estimate=total, error_bound=err)
        mid = 0.5 * (lo + hi)
        if np.any((mid <= lo) | (mid >= hi)):
            raise QuadratureError(
                "panel width reached floating-point resolution",
                estimate=total, error_bound=err)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])


def integrate_oscillatory_tail(
    f: Callable[[np.ndarray], np.ndarray],
    R: float,
    spec: QuadSpec,
    frequency: float,
    phase: float = 0.0,
    batch: int = 512,
    alternating: bool = False,
) -> float:
    """Integrate ``f`` over [R, inf) one half-period at a time.

    ``f`` is expected to behave like ``g(rho) * sin(frequency*rho + phase)`` with
    ``|g(rho)| <= c * rho**p`` as given by ``spec.tail``. Panel edges sit on the
    zeros of the trigonometric factor. Summation stops once the envelope remainder
    ``c R**(p+1) / |p+1|`` drops below ``spec.tail.target``.

    With ``alternating=True`` the caller vouches that ``f`` really changes sign
    between panels with an eventually monotone amplitude; the magnitude of the
    next panel, ``2 c rho**p / frequency``, then also counts as a remainder bound,
    which ends the summation far sooner.
    """
    tail = spec.tail
    if tail is None:
        raise NumericsError("integrate_oscillatory_tail needs spec.tail (the envelope)")
    if not frequency > 0:
        raise NumericsError("oscillation frequency must be positive")
    half = math.pi / frequency
    first = (math.floor((R * frequency + phase) / math.pi) + 1) * math.pi - phase
    first /= frequency
    partial = math.fsum([integrate_adaptive(f, R, first, spec)]) if first > R else 0.0

    c, p = tail.constant, tail.exponent
    pieces = [partial]
    start = first
    used = 0
    while True:
        bound = tail.remainder(start)
        if alternating:
            bound = min(bound, 2.0 * c * start ** p / frequency)
        if bound <= tail.target:
            return math.fsum(pieces)
        if used >= spec.max_subdivisions:
            raise QuadratureError(
                f"oscillatory tail not within bound after {used} panels",
                estimate=math.fsum(pieces), error_bound=bound)
        nb = min(batch, spec.max_subdivisions - used)
        lo = start + half * np.arange(nb)
        x = lo[:, None] + 0.5 * half * (1.0 + KRONROD_NODES[None, :])
        y = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
        if not np.all(np.isfinite(y)):
            bad = x[~np.isfinite(y)][0]
            raise QuadratureError(f"integrand is not finite at x={bad!r}", abscissa=float(bad))
        panel = 0.5 * half * (y @ KRONROD_WEIGHTS)
        # Only keep panels up to the first one whose right edge satisfies the bound.
        right = lo + half
        rem = c * right ** (p + 1) / abs(p + 1)
        if alternating:
            rem = np.minimum(rem, 2.0 * c * right ** p / frequency)
        ok = rem <= tail.target
        if ok.any():
            stop = int(np.argmax(ok)) + 1
            pieces.extend(panel[:stop].tolist())
            return math.fsum(pieces)
        pieces.extend(panel.tolist())
        used += nb
        start = float(lo[-1] + half)


# ---------------------------------------------------------------------------
# Closed-form tails: int_R^inf rho**p exp(i*omega*rho) d rho.

_SERIES_SPLIT = 2.0


def _upper_gamma_cf(a: float, X: np.ndarray) -> np.ndarray:
    """Continued fraction for Gamma(a, z) * exp(z) * z**(-a) at z = -iX (X >= 2)."""
    z = -1j * X
    tiny = 1e-300
    b = z + 1.0 - a
    c = np.full(X.shape, 1.0 / tiny, dtype=complex)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, 2000):
        an = -i * (i - a)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = d * c
        h = h * delta
        if np.max(np.abs(delta - 1.0)) < 1e-15:
            return h
    raise QuadratureError("incomplete-gamma continued fraction did not converge")


def _unit_tail(p: float, X: np.ndarray) -> np.ndarray:
    """int_X^inf u**p exp(iu) du for X >= 2 (p < -1)."""
    return np.exp(1j * X) * X ** (p + 1.0) * _upper_gamma_cf(p + 1.0, X)


@lru_cache(maxsize=256)
def _unit_tail_at_split(p: float) -> complex:
    return complex(_unit_tail(p, np.array([_SERIES_SPLIT]))[0])


def trig_power_tail(power: float, omega, R: float = 1.0) -> np.ndarray:
    """Exact value of ``int_R^inf rho**power * exp(i*omega*rho) d rho``.

    Real part is the cosine moment, imaginary part the sine moment. ``omega`` may be
    any array of reals (negative values give the complex conjugate); ``power``
    must be below -1. Uses the incomplete-gamma continued fraction for
    ``|omega| R >= 2`` and a term-wise power series below that, so small and zero
    frequencies are handled without cancellation.
    """
    p = float(power)
    if not p < -1:
        raise NumericsError(f"power {p} >= -1: tail integral diverges")
    if R <= 0:
        raise NumericsError("tail start R must be positive")
    om = np.asarray(omega, dtype=float)
    w = np.abs(om)
    X = w * R
    out = np.empty(w.shape, dtype=complex)
    zero = X < 1e-100
    out[zero] = R ** (p + 1.0) / (-(p + 1.0))
    big = X >= _SERIES_SPLIT
    if big.any():
        out[big] = w[big] ** (-p - 1.0) * _unit_tail(p, X[big])
    small = ~big & ~zero
    if small.any():
        ws = w[small]
        Xs = X[small]
        L = np.log(Xs / _SERIES_SPLIT)
        scale = ws ** (-p - 1.0)
        acc = scale * _unit_tail_at_split(p)
        # int_X^2 u^p e^{iu} du = sum_n i^n/n! int_X^2 u^(p+n) du
        inv_fact = 1.0
        for n in range(60):
            q = p + n + 1.0
            if abs(q) < 1e-13:
                moment = -L
            else:
                moment = -np.expm1(q * L) / q
            term = (1j ** n) * inv_fact * scale * _SERIES_SPLIT ** q * moment
            acc = acc + term
            if n > 4 and np.max(np.abs(term)) < 1e-18 * np.max(np.abs(acc)):
                break
            inv_fact /= n + 1
        out[small] = acc
    return np.where(om < 0, np.conj(out), out)
