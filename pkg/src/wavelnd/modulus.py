"""Uniform modulus of continuity: the J(eps) statistic, sandwich constants and
covering-number growth of the canonical metric."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .field import (
    CovarianceCache,
    DomainBox,
    FieldSpec,
    covariance_matrix,
    gamma_modulus,
    sandwich_scan,
    sigma_from_covariance,
)
from .lnd import dyadic_shrink
from .numerics import JitterPolicy, factor_psd
from .sampler import (
    FACTORIZATION_BUDGET,
    FieldSample,
    GridSpec,
    build_grid,
    sample_field,
)

MIN_QUALIFYING_PAIRS = 50


class ModulusError(ValueError):
    pass


def epsilon_schedule(spec: FieldSpec, domain: DomainBox, n_levels: int,
                     C2_empirical: float, first_level: int = 1) -> list:
    """eps_n = [C2 ((1 + k) delta')^(2-beta) 2^(-(2-beta) n)]^(1/2) for
    n = first_level, ..., first_level + n_levels - 1."""
    if not C2_empirical > 0:
        raise ModulusError("C2_empirical must be positive")
    if n_levels < 1:
        raise ModulusError("n_levels must be at least 1")
    e = spec.holder_exponent
    dp = dyadic_shrink(domain, spec.k)
    base = C2_empirical * ((1.0 + spec.k) * dp) ** e
    return [math.sqrt(base * 2.0 ** (-e * n))
            for n in range(first_level, first_level + n_levels)]


class PairTable:
    """Unordered point pairs with positive sigma, sorted by sigma.

    Only pairs with sigma <= ``max_sigma`` are kept, which bounds memory on
    large grids.
    """

    def __init__(self, sigma_table: np.ndarray, max_sigma: float = math.inf):
        S = np.asarray(sigma_table, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise ModulusError("sigma table must be square")
        i, j = np.triu_indices(S.shape[0], k=1)
        s = S[i, j]
        keep = (s > 0) & (s <= max_sigma)
        order = np.argsort(s[keep], kind="stable")
        self.i = i[keep][order]
        self.j = j[keep][order]
        self.sigma = s[keep][order]
        self.gamma = gamma_modulus(self.sigma)
        self.n_points = S.shape[0]

    def count(self, epsilon: float) -> int:
        return int(np.searchsorted(self.sigma, epsilon, side="right"))


def estimate_J_levels(values: np.ndarray, pairs: PairTable,
                      epsilons: Sequence[float]) -> np.ndarray:
    """J at several epsilons for each realization (rows of ``values``).

    One running maximum over pairs in increasing sigma serves every level, so
    J is exactly non-decreasing in epsilon.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[1] != pairs.n_points:
        raise ModulusError("realizations do not match the sigma table")
    counts = [pairs.count(e) for e in epsilons]
    for e, c in zip(epsilons, counts):
        if c == 0:
            raise ModulusError(
                f"no pair with 0 < sigma <= {e:.4g}; use a denser grid or a larger epsilon")
    top = max(counts)
    i, j, g = pairs.i[:top], pairs.j[:top], pairs.gamma[:top]
    out = np.empty((values.shape[0], len(epsilons)))
    for r, row in enumerate(values):
        run = np.maximum.accumulate(np.abs(row[i] - row[j]) / g)
        out[r] = run[np.asarray(counts) - 1]
    return out


def estimate_J(sample: FieldSample, sigma_table: np.ndarray, epsilon: float) -> np.ndarray:
    """max |u(p) - u(q)| / gamma(sigma[p, q]) over pairs with 0 < sigma <= epsilon,
    one value per realization."""
    pairs = PairTable(sigma_table, max_sigma=epsilon)
    return estimate_J_levels(sample.values, pairs, [epsilon])[:, 0]


def greedy_cover_count(sigma_table: np.ndarray, epsilon: float) -> int:
    """Number of centres picked by greedy covering: the first uncovered point (in
    grid order) becomes a centre and covers everything within ``epsilon``."""
    S = np.asarray(sigma_table)
    covered = np.zeros(S.shape[0], dtype=bool)
    n = 0
    while True:
        free = np.flatnonzero(~covered)
        if free.size == 0:
            return n
        covered |= S[free[0]] <= epsilon
        n += 1


def _default_entropy_epsilons(sigma_table: np.ndarray, n: int = 8) -> list:
    S = sigma_table.copy()
    np.fill_diagonal(S, np.inf)
    nearest = float(np.max(np.min(S, axis=1)))
    np.fill_diagonal(S, 0.0)
    # From two grid spacings (discretization) up to half the diameter (saturation).
    lo, hi = 2.0 * nearest, 0.5 * float(S.max())
    if not hi > lo:
        raise ModulusError("grid too coarse for a covering scan")
    return list(np.geomspace(lo, hi, n))


def entropy_scan(spec: FieldSpec, domain: DomainBox, fine_grid: GridSpec,
                 epsilons: Optional[Sequence[float]] = None,
                 budget: int = FACTORIZATION_BUDGET) -> dict:
    """Fit the growth exponent of greedy covering numbers N(eps) of the grid.

    The slope of log N against log(1/eps) is compared with (1 + k)/(2 - beta).
    Since sigma^2 is comparable to Delta^(2 - beta), balls of sigma-radius eps
    have l1-radius of order eps^(2/(2 - beta)), so the count on a (1+k)-dimensional
    box scales like eps^(-2(1 + k)/(2 - beta)); that value is reported as
    ``corrected_exponent``.
    """
    if fine_grid.domain != domain:
        raise ModulusError("fine grid must live on the given domain")
    pts = build_grid(fine_grid, spec.k, budget=budget)
    S = sigma_from_covariance(covariance_matrix(spec, pts))
    if epsilons is None:
        epsilons = _default_entropy_epsilons(S)
    smax = float(S.max())
    S_off = S + np.diag(np.full(len(pts), np.inf))
    smin = float(S_off.min())
    levels = []
    for e in sorted(float(v) for v in epsilons):
        if not smin < e < smax:
            continue
        levels.append({"epsilon": e, "cover_count": greedy_cover_count(S, e)})
    if len(levels) < 3:
        raise ModulusError("fewer than 3 epsilons inside the range of grid sigma values")
    x = np.log([1.0 / lv["epsilon"] for lv in levels])
    y = np.log([lv["cover_count"] for lv in levels])
    slope, intercept = np.polyfit(x, y, 1)
    k, e = spec.k, spec.holder_exponent
    theory = (1.0 + k) / e
    return {
        "n_points": len(pts),
        "levels": levels,
        "fitted_exponent": float(slope),
        "intercept": float(intercept),
        "theory_exponent": theory,
        "corrected_exponent": 2.0 * theory,
        "relative_error": float(abs(slope - theory) / theory),
        "relative_error_corrected": float(abs(slope - 2.0 * theory) / (2.0 * theory)),
    }


@dataclass(frozen=True)
class ModulusConfig:
    domain: DomainBox
    grid: GridSpec
    n_levels: int = 6
    n_samples: int = 100
    seed: int = 0
    sandwich_pairs: int = 1000
    entropy_grid: Optional[GridSpec] = None
    min_pairs: int = MIN_QUALIFYING_PAIRS

    def __post_init__(self):
        if self.n_levels < 1 or self.n_samples < 1:
            raise ModulusError("n_levels and n_samples must be positive")
        if self.grid.domain != self.domain:
            raise ModulusError("grid must live on the configured domain")


@dataclass
class ModulusReport:
    epsilon_schedule: list
    J_values: np.ndarray
    K_estimate: float
    K_dispersion: float
    sandwich: dict
    entropy: Optional[dict]
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "epsilon_schedule": list(self.epsilon_schedule),
            "J_values": self.J_values.tolist(),
            "K_estimate": self.K_estimate,
            "K_dispersion": self.K_dispersion,
            "sandwich": self.sandwich,
            "entropy": self.entropy,
            "diagnostics": self.diagnostics,
        }


def _dispersion(col: np.ndarray) -> float:
    q1, med, q3 = np.quantile(col, [0.25, 0.5, 0.75])
    return float((q3 - q1) / med)


def _first_level(spec, domain, n_levels, C2, pairs: PairTable, min_pairs: int) -> int:
    # Largest starting level whose smallest epsilon still has min_pairs pairs.
    smallest = epsilon_schedule(spec, domain, 1, C2, first_level=0)[0]
    ratio = 2.0 ** (-spec.holder_exponent / 2.0)
    if pairs.sigma.size < min_pairs:
        raise ModulusError(f"grid has fewer than {min_pairs} pairs with positive sigma")
    need = pairs.sigma[min_pairs - 1]
    # smallest * ratio^m >= need  <=>  m <= log(need/smallest)/log(ratio)
    m = math.floor(math.log(need / smallest) / math.log(ratio) + 1e-12)
    return m - (n_levels - 1)


def modulus_experiment(spec: FieldSpec, config: ModulusConfig, threads: int = 1,
                       cache: CovarianceCache | None = None) -> ModulusReport:
    """Sample the grid, evaluate J along the epsilon schedule and summarize.

    The schedule follows the dyadic formula with the empirical C2; its starting
    level is shifted so that at least ``config.min_pairs`` grid pairs qualify at
    the smallest epsilon.
    """
    pts = build_grid(config.grid, spec.k)
    C = covariance_matrix(spec, pts, cache)
    C = 0.5 * (C + C.T)
    S = sigma_from_covariance(C)

    sandwich = sandwich_scan(spec, config.domain, config.sandwich_pairs,
                             seed=config.seed, cache=cache)
    C2 = sandwich["C2"]
    pairs = PairTable(S)
    n0 = _first_level(spec, config.domain, config.n_levels, C2, pairs, config.min_pairs)
    eps = epsilon_schedule(spec, config.domain, config.n_levels, C2, first_level=n0)
    pairs = PairTable(S, max_sigma=eps[0])

    fac = factor_psd(C, JitterPolicy())
    sample = sample_field(spec, pts, config.n_samples, config.seed, threads=threads,
                          factor=fac)
    J = estimate_J_levels(sample.values, pairs, eps)
    if not np.all(np.isfinite(J)):
        raise ModulusError("non-finite J values")

    entropy = None
    if config.entropy_grid is not None:
        entropy = entropy_scan(spec, config.domain, config.entropy_grid,
                               budget=config.entropy_grid.size(spec.k))

    last = J[:, -1]
    return ModulusReport(
        epsilon_schedule=eps,
        J_values=J,
        K_estimate=float(np.median(last)),
        K_dispersion=_dispersion(last),
        sandwich=sandwich,
        entropy=entropy,
        diagnostics={
            "first_level": n0,
            "qualifying_pairs": [pairs.count(e) for e in eps],
            "dispersion_by_level": [_dispersion(J[:, m]) for m in range(J.shape[1])],
            "median_by_level": [float(np.median(J[:, m])) for m in range(J.shape[1])],
            "min_positive_sigma": float(pairs.sigma[0]),
            "applied_jitter": fac.applied_jitter,
            "n_points": len(pts),
        },
    )
