"""The Gaussian field u(t, x) solving the linear stochastic wave equation.

Covariances come from two independent engines:

* ``covariance_direct_k1`` integrates the light-cone rectangle formula in
  physical space (k = 1 only);
* ``covariance_spectral`` evaluates the Fourier-side isometry for k = 1, 2, 3 as a
  single radial integral, split at rho = 1 into an adaptive piece and an exact
  power-times-trigonometric tail.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gamma as gamma_fn

from .numerics import (
    QuadSpec,
    angular_factor,
    integrate_adaptive,
    sphere_area,
    trig_power_tail,
)


class FieldError(ValueError):
    """Inadmissible field parameters or points."""


def _check_admissible(k: int, beta: float) -> None:
    if k not in (1, 2, 3):
        raise FieldError(f"spatial dimension k={k} unsupported; need k in {{1, 2, 3}}")
    if not math.isfinite(beta):
        raise FieldError("beta must be finite")
    if k == 1 and beta == 1:
        return
    if not 0 < beta < min(k, 2):
        raise FieldError(
            f"inadmissible beta={beta} for k={k}: need 0 < beta < min(k, 2) = {min(k, 2)}"
            " (or k = 1 = beta for space-time white noise)")


def riesz_spectral_constant(k: int, beta: float) -> float:
    """Constant c_{k,beta} in front of the spectral isometry.

    With F f(xi) = int f(x) exp(-i xi.x) dx, the Riesz kernel |x|^-beta has transform
    2^(k-beta) pi^(k/2) Gamma((k-beta)/2) / Gamma(beta/2) |xi|^(beta-k), and the
    Plancherel factor contributes (2 pi)^-k. White noise (k = 1 = beta) gives 1/(2 pi).
    """
    _check_admissible(k, beta)
    if k == 1 and beta == 1:
        return 1.0 / (2.0 * math.pi)
    return float(
        (2.0 * math.pi) ** (-k) * 2.0 ** (k - beta) * math.pi ** (k / 2.0)
        * gamma_fn((k - beta) / 2.0) / gamma_fn(beta / 2.0))


@dataclass(frozen=True)
class FieldSpec:
    k: int
    beta: float
    norm_const: float = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "beta", float(self.beta))
        object.__setattr__(self, "norm_const", riesz_spectral_constant(self.k, self.beta))

    @property
    def white_noise(self) -> bool:
        return self.k == 1 and self.beta == 1.0

    @property
    def holder_exponent(self) -> float:
        """Exponent 2 - beta in the metric sandwich sigma^2 ~ Delta^(2-beta)."""
        return 2.0 - self.beta


@dataclass(frozen=True)
class SpacetimePoint:
    t: float
    x: tuple

    def __post_init__(self):
        x = tuple(float(v) for v in np.atleast_1d(self.x))
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", x)
        if not (math.isfinite(self.t) and all(math.isfinite(v) for v in x)):
            raise FieldError(f"non-finite coordinates in {self}")
        if self.t < 0:
            raise FieldError(f"time must be >= 0, got t={self.t}")

    @property
    def k(self) -> int:
        return len(self.x)

    def as_array(self) -> np.ndarray:
        return np.array((self.t, *self.x))

    @classmethod
    def from_array(cls, row: Sequence[float]) -> "SpacetimePoint":
        return cls(float(row[0]), tuple(float(v) for v in row[1:]))


@dataclass(frozen=True)
class DomainBox:
    """I = [a, a'] x [-b, b]^k with time bounded away from zero."""

    a: float
    a_prime: float
    b: float

    def __post_init__(self):
        if not (0 < self.a < self.a_prime < math.inf and 0 < self.b < math.inf):
            raise FieldError(
                f"need 0 < a < a' < inf and 0 < b < inf, got a={self.a}, "
                f"a'={self.a_prime}, b={self.b}")

    def contains(self, p: SpacetimePoint, tol: float = 1e-12) -> bool:
        return (self.a - tol <= p.t <= self.a_prime + tol
                and all(-self.b - tol <= v <= self.b + tol for v in p.x))

    def uniform(self, rng: np.random.Generator, k: int, size: int) -> np.ndarray:
        """``size`` uniform points as rows (t, x_1, ..., x_k)."""
        t = rng.uniform(self.a, self.a_prime, size)
        x = rng.uniform(-self.b, self.b, (size, k))
        return np.column_stack([t, x])


def _check_points(spec: FieldSpec, p: SpacetimePoint, q: SpacetimePoint) -> None:
    if p.k != spec.k or q.k != spec.k:
        raise FieldError(f"point dimension does not match k={spec.k}")


# ---------------------------------------------------------------------------
# Direct engine (k = 1).

_DIRECT_QUAD = QuadSpec(abs_tol=1e-14, rel_tol=1e-13, max_subdivisions=4000)


def _riesz_phi(beta: float):
    """Second antiderivative of |u|^-beta on the line."""
    const = 1.0 / ((1.0 - beta) * (2.0 - beta))
    return lambda u: const * np.abs(u) ** (2.0 - beta)


def covariance_direct_k1(spec: FieldSpec, p: SpacetimePoint, q: SpacetimePoint,
                         quad: QuadSpec = _DIRECT_QUAD) -> float:
    """Cov(u(p), u(q)) for k = 1 from G(t, x) = 1{|x| < t} / 2 in physical space.

    The noise integral over the two light-cone intervals is done in closed form;
    the remaining time integral over r in [0, t ^ s] is adaptive, with break
    points where the interval edges cross.
    """
    if spec.k != 1:
        raise FieldError("covariance_direct_k1 requires k = 1")
    _check_points(spec, p, q)
    t, s = p.t, q.t
    m = min(t, s)
    if m <= 0.0:
        return 0.0
    x, y = p.x[0], q.x[0]
    z = x - y
    S = t + s
    d = t - s
    if spec.white_noise:
        def integrand(r):
            lo = np.maximum(x - (t - r), y - (s - r))
            hi = np.minimum(x + (t - r), y + (s - r))
            return np.maximum(hi - lo, 0.0)
    else:
        phi = _riesz_phi(spec.beta)
        const_part = phi(z - d) + phi(z + d)

        def integrand(r):
            return phi(z + S - 2.0 * r) - const_part + phi(z - S + 2.0 * r)
    breaks = [0.5 * (S + z), 0.5 * (S - z)]
    return 0.25 * integrate_adaptive(integrand, 0.0, m, quad, points=breaks)


def covariance_k1_closed(beta: float, t, s, z) -> np.ndarray:
    """Vectorized k = 1 covariance with the r-integral done by antiderivatives.

    Same integrand as :func:`covariance_direct_k1`; used for bulk matrix assembly.
    """
    t, s, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (t, s, z)))
    m = np.minimum(t, s)
    S = t + s
    d = t - s
    ad = np.abs(d)
    if beta == 1.0:
        phi = lambda u: 0.5 * np.abs(u)
        psi = lambda u: 0.25 * u * np.abs(u)
    else:
        c2 = 1.0 / ((1.0 - beta) * (2.0 - beta))
        c3 = c2 / (3.0 - beta)
        phi = lambda u: c2 * np.abs(u) ** (2.0 - beta)
        psi = lambda u: c3 * np.sign(u) * np.abs(u) ** (3.0 - beta)
    out = (psi(z + S) - psi(z + ad) + psi(z - ad) - psi(z - S)) / 8.0
    out = out - 0.25 * m * (phi(z - d) + phi(z + d))
    return np.where(m > 0, out, 0.0)


# ---------------------------------------------------------------------------
# Spectral engine.

_SPECTRAL_QUAD = QuadSpec(abs_tol=1e-13, rel_tol=1e-12, max_subdivisions=20000)
_GL_R, _GL_W = np.polynomial.legendre.leggauss(16)


def _time_kernel_over_rho2(rho: np.ndarray, t: float, s: float) -> np.ndarray:
    """T(rho; t, s) / rho^2 where T = int_0^{t^s} sin((t-r)rho) sin((s-r)rho) dr.

    Closed form for rho * max(t, s) > 1; Gauss-Legendre in r below that, where the
    closed form loses digits to cancellation.
    """
    m, M = min(t, s), max(t, s)
    d = t - s
    rho = np.asarray(rho, dtype=float)
    out = np.empty_like(rho)
    small = rho * M <= 1.0
    if small.any():
        rs = rho[small]
        r = 0.5 * m * (_GL_R + 1.0)
        w = 0.5 * m * _GL_W
        a = np.outer(rs, t - r)
        b = np.outer(rs, s - r)
        # sin(a)/rho * sin(b)/rho, with sinc to stay exact at rho -> 0
        fa = (t - r) * np.sinc(a / np.pi)
        fb = (s - r) * np.sinc(b / np.pi)
        out[small] = (fa * fb) @ w
    big = ~small
    if big.any():
        rb = rho[big]
        T = 0.5 * (m * np.cos(d * rb) - np.cos(M * rb) * np.sin(m * rb) / rb)
        out[big] = T / (rb * rb)
    return out


def _tail_kernel(beta: float, t: float, s: float, zeta: np.ndarray) -> np.ndarray:
    """H(zeta) = int_1^inf rho^(beta-3) T(rho; t, s) cos(zeta rho) d rho, exactly.

    Uses T(rho) = (m/2) cos(d rho) - [sin(S rho) - sin(|d| rho)] / (4 rho).
    """
    m = min(t, s)
    d = abs(t - s)
    S = t + s
    zeta = np.asarray(zeta, dtype=float)
    p = beta - 3.0
    cos_part = trig_power_tail(p, np.concatenate([d - zeta, d + zeta])).real
    n = zeta.size
    sin_part = trig_power_tail(
        p - 1.0, np.concatenate([S + zeta, S - zeta, d + zeta, d - zeta])).imag
    H = 0.25 * m * (cos_part[:n] + cos_part[n:])
    H -= 0.125 * (sin_part[:n] + sin_part[n:2 * n] - sin_part[2 * n:3 * n] - sin_part[3 * n:])
    return H



def _integrate_pieces(f, edges: Sequence[float], quad: QuadSpec) -> float:
    """Integral of ``f`` over [edges[0], edges[-1]] where ``f`` may have algebraic
    cusps at the edges.

    Each piece is mapped from [0, 1] through the quintic smoothstep, whose
    Jacobian vanishes to second order at both ends and flattens the cusps; all
    pieces go through one adaptive call on [0, n_pieces].
    """
    e = np.asarray(edges, dtype=float)
    e = e[np.concatenate([[True], np.diff(e) > 0])]
    widths = np.diff(e)
    n = widths.size

    def g(u):
        j = np.minimum(np.floor(u).astype(int), n - 1)
        w = u - j
        phi = w ** 3 * (10.0 + w * (-15.0 + 6.0 * w))
        dphi = 30.0 * w * w * (1.0 - w) ** 2
        return f(e[j] + widths[j] * phi) * widths[j] * dphi

    return integrate_adaptive(g, 0.0, float(n), quad, points=list(range(1, n)))


def covariance_spectral(spec: FieldSpec, p: SpacetimePoint, q: SpacetimePoint,
                        quad: QuadSpec = _SPECTRAL_QUAD) -> float:
    """Cov(u(p), u(q)) from the spectral isometry.

    c_{k,beta} int_0^inf rho^(beta-3) T(rho; t, s) A_k(rho |x - y|) d rho, where the
    time integral T is analytic and A_k is the angular integral of cos over the
    sphere (a Bessel function). On (0, 1] the substitution rho = u^(1/beta) removes
    the rho^(beta-1) endpoint singularity. On [1, inf) the integral is the sphere
    average of an exact power-times-trigonometric tail, integrated adaptively over
    the direction with break points where a frequency vanishes.
    """
    _check_points(spec, p, q)
    t, s = p.t, q.t
    if min(t, s) <= 0.0:
        return 0.0
    k, beta = spec.k, spec.beta
    zr = float(np.linalg.norm(np.subtract(p.x, q.x)))

    def low(u):
        rho = u ** (1.0 / beta)
        return _time_kernel_over_rho2(rho, t, s) * angular_factor(k, rho * zr) / beta

    head = integrate_adaptive(low, 0.0, 1.0, quad)

    d, S = abs(t - s), t + s
    if zr == 0.0:
        tail = sphere_area(k) * float(_tail_kernel(beta, t, s, np.zeros(1))[0])
    elif k == 1:
        tail = 2.0 * float(_tail_kernel(beta, t, s, np.array([zr]))[0])
    elif k == 2:
        edges = [0.0, *sorted(math.acos(w / zr) for w in (d, S) if w < zr), 0.5 * math.pi]
        tail = 4.0 * _integrate_pieces(
            lambda th: _tail_kernel(beta, t, s, zr * np.cos(th)), edges, quad)
    else:
        edges = [0.0, *sorted(w / zr for w in (d, S) if 0.0 < w < zr), 1.0]
        tail = 4.0 * math.pi * _integrate_pieces(
            lambda v: _tail_kernel(beta, t, s, zr * v), edges, quad)
    return spec.norm_const * (head + tail)


# ---------------------------------------------------------------------------
# Dispatch, caching, metric.

class CovarianceCache:
    """Memo of covariance values keyed by (spec, t ^ s, t v s, |x - y|); safe for
    concurrent use.

    Keys are exact floats and values are computed from the key alone, so the
    contents never depend on evaluation order.
    """

    def __init__(self):
        self._data: dict = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(spec: FieldSpec, p: SpacetimePoint, q: SpacetimePoint):
        zr = float(np.linalg.norm(np.subtract(p.x, q.x)))
        return (spec.k, spec.beta, min(p.t, q.t), max(p.t, q.t), zr)

    def get(self, key):
        with self._lock:
            val = self._data.get(key)
            if val is None:
                self.misses += 1
            else:
                self.hits += 1
            return val

    def put(self, key, value: float) -> None:
        with self._lock:
            self._data[key] = value

    def __len__(self):
        return len(self._data)


def covariance(spec: FieldSpec, p: SpacetimePoint, q: SpacetimePoint,
               cache: CovarianceCache | None = None) -> float:
    """Cov(u(p), u(q)): direct engine for k = 1, spectral engine otherwise.

    The value depends on the points only through min/max of the times and |x - y|,
    so it is symmetric in (p, q) by construction.
    """
    _check_points(spec, p, q)
    key = CovarianceCache.key(spec, p, q)
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            return hit
    # Evaluate at the canonical pair (t ^ s, 0), (t v s, |x - y| e_1).
    _, _, t0, t1, zr = key
    p0 = SpacetimePoint(t0, (0.0,) * spec.k)
    q0 = SpacetimePoint(t1, (zr,) + (0.0,) * (spec.k - 1))
    if spec.k == 1:
        val = covariance_direct_k1(spec, p0, q0)
    else:
        val = covariance_spectral(spec, p0, q0)
    if cache is not None:
        cache.put(key, val)
    return val


def variance(spec: FieldSpec, p: SpacetimePoint, cache: CovarianceCache | None = None) -> float:
    return covariance(spec, p, p, cache)


def sigma_metric(spec: FieldSpec, p: SpacetimePoint, q: SpacetimePoint,
                 cache: CovarianceCache | None = None) -> float:
    """Canonical metric E[(u(p) - u(q))^2]^(1/2)."""
    if p == q:
        return 0.0
    rad = (variance(spec, p, cache) + variance(spec, q, cache)
           - 2.0 * covariance(spec, p, q, cache))
    if rad < 0:
        if rad < -1e-12:
            raise FieldError(f"negative squared increment {rad:.3g} between {p} and {q}")
        return 0.0
    return math.sqrt(rad)


def gamma_modulus(sigma):
    """sigma * sqrt(log(1 + 1/sigma)), extended by 0 at sigma = 0."""
    sig = np.asarray(sigma, dtype=float)
    if np.any(sig < 0) or np.any(np.isnan(sig)):
        raise FieldError("gamma_modulus requires sigma >= 0")
    with np.errstate(divide="ignore"):
        out = np.where(sig > 0, sig * np.sqrt(np.log1p(1.0 / np.where(sig > 0, sig, 1.0))), 0.0)
    return float(out) if out.ndim == 0 else out


def l1_distance(p: SpacetimePoint, q: SpacetimePoint) -> float:
    """|t - t'| + sum_j |x_j - x'_j|."""
    return abs(p.t - q.t) + sum(abs(a - b) for a, b in zip(p.x, q.x))


def covariance_matrix(spec: FieldSpec, points: Sequence[SpacetimePoint],
                      cache: CovarianceCache | None = None) -> np.ndarray:
    """Dense matrix of pairwise covariances.

    k = 1 is assembled in one vectorized pass through :func:`covariance_k1_closed`;
    other dimensions evaluate the spectral engine once per distinct
    (t ^ s, t v s, |x - y|).
    """
    P = np.array([pt.as_array() for pt in points], dtype=float).reshape(len(points), -1)
    n = P.shape[0]
    if n and P.shape[1] != spec.k + 1:
        raise FieldError(f"point dimension does not match k={spec.k}")
    if spec.k == 1:
        t = P[:, 0]
        z = P[:, 1]
        M = covariance_k1_closed(spec.beta, t[:, None], t[None, :], z[:, None] - z[None, :])
        return 0.5 * (M + M.T)
    cache = cache if cache is not None else CovarianceCache()
    M = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            M[i, j] = M[j, i] = covariance(spec, points[i], points[j], cache)
    return M


def sigma_from_covariance(C: np.ndarray) -> np.ndarray:
    """Pairwise canonical metric from a covariance matrix."""
    dg = np.diag(C)
    rad = dg[:, None] + dg[None, :] - 2.0 * C
    np.fill_diagonal(rad, 0.0)
    return np.sqrt(np.clip(rad, 0.0, None))


def sandwich_scan(spec: FieldSpec, domain: DomainBox, n_pairs: int, seed: int,
                  max_delta: float = 0.5, cache: CovarianceCache | None = None) -> dict:
    """Empirical C1, C2 with C1 Delta^(2-beta) <= sigma^2 <= C2 Delta^(2-beta).

    The first point of each pair is uniform in the box; the second is uniform in
    the cube of half-width ``max_delta`` around it, redrawn until it lies in the box
    with 0 < Delta <= max_delta.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    ratios = np.empty(n_pairs)
    deltas = np.empty(n_pairs)
    k = spec.k
    for i in range(n_pairs):
        p = SpacetimePoint.from_array(domain.uniform(rng, k, 1)[0])
        while True:
            row = p.as_array() + rng.uniform(-max_delta, max_delta, k + 1)
            q = SpacetimePoint.from_array(row)
            delta = l1_distance(p, q)
            if 0 < delta <= max_delta and domain.contains(q, tol=0.0):
                break
        sig = sigma_metric(spec, p, q, cache)
        ratios[i] = sig * sig / delta ** spec.holder_exponent
        deltas[i] = delta
    return {
        "C1": float(ratios.min()),
        "C2": float(ratios.max()),
        "ratio_quantiles": [float(v) for v in np.quantile(ratios, [0.05, 0.5, 0.95])],
        "n_pairs": int(n_pairs),
        "max_delta": float(max_delta),
        "min_delta": float(deltas.min()),
    }
