"""Exact sampling of the field on finite point sets."""

from __future__ import annotations

import hashlib
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .field import (
    CovarianceCache,
    DomainBox,
    FieldError,
    FieldSpec,
    SpacetimePoint,
    covariance_matrix,
)
from .numerics import JitterPolicy, PsdFactorization, factor_psd

FACTORIZATION_BUDGET = 3000


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    domain: DomainBox
    time_points: int
    space_points_per_axis: int

    def __post_init__(self):
        if self.time_points < 1 or self.space_points_per_axis < 1:
            raise ValueError("grid sizes must be positive")

    def size(self, k: int) -> int:
        return self.time_points * self.space_points_per_axis ** k


@dataclass
class FieldSample:
    points: list
    values: np.ndarray
    seed: int
    spec: FieldSpec
    applied_jitter: float = 0.0

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]


def _axis(lo: float, hi: float, n: int) -> np.ndarray:
    return np.array([lo]) if n == 1 else np.linspace(lo, hi, n)


def build_grid(g: GridSpec, k: int, budget: int = FACTORIZATION_BUDGET) -> list:
    """Tensor grid over the domain, lexicographic in (t, x_1, ..., x_k), endpoints
    included."""
    n = g.size(k)
    if n > budget:
        raise BudgetError(
            f"grid has {n} points, over the limit of {budget} points")
    ts = _axis(g.domain.a, g.domain.a_prime, g.time_points)
    xs = _axis(-g.domain.b, g.domain.b, g.space_points_per_axis)
    return [SpacetimePoint(t, x) for t in ts for x in itertools.product(xs, repeat=k)]


def points_array(points: Sequence[SpacetimePoint]) -> np.ndarray:
    return np.array([p.as_array() for p in points], dtype=float)


def assemble_covariance_matrix(spec: FieldSpec, points: Sequence[SpacetimePoint],
                               cache: CovarianceCache | None = None) -> np.ndarray:
    """Symmetric covariance matrix over ``points`` (diagonal = variances)."""
    for p in points:
        if p.t <= 0:
            raise FieldError(f"points must have t > 0, got {p}")
    C = covariance_matrix(spec, points, cache)
    return 0.5 * (C + C.T)


def substream_seed(seed: int, index: int) -> int:
    """64-bit seed for realization ``index``: counter-mode SHA-256 of (seed, index)."""
    digest = hashlib.sha256(
        int(seed).to_bytes(8, "little", signed=False) + int(index).to_bytes(8, "little")
    ).digest()
    return int.from_bytes(digest[:8], "little")


def standard_normals(seed: int, index: int, n: int) -> np.ndarray:
    """``n`` standard normals for realization ``index`` by inverse-CDF transform of
    Philox uniforms on the open interval (0, 1)."""
    rng = np.random.Generator(np.random.Philox(substream_seed(seed, index)))
    u = rng.random(n)
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    return ndtri(u)


def sample_field(spec: FieldSpec, points: Sequence[SpacetimePoint], n_samples: int,
                 seed: int, threads: int = 1,
                 cache: CovarianceCache | None = None,
                 factor: PsdFactorization | None = None) -> FieldSample:
    """Draw ``n_samples`` i.i.d. realizations of the field on ``points``.

    Row i depends only on (seed, i); with identical inputs the output is
    bit-identical whatever ``threads`` is.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    points = list(points)
    # Repeated points share one column of the factor so their values coincide.
    index: dict = {}
    unique = []
    for p in points:
        if p not in index:
            index[p] = len(unique)
            unique.append(p)
    column = [index[p] for p in points]
    if factor is None:
        C = assemble_covariance_matrix(spec, unique, cache)
        factor = factor_psd(C, JitterPolicy())
    elif factor.dimension != len(unique):
        raise ValueError("supplied factorization does not match the distinct points")
    L = factor.lower_factor
    n = len(unique)

    def draw(rows: range) -> np.ndarray:
        Z = np.stack([standard_normals(seed, i, n) for i in rows])
        # Row-by-row products keep results independent of how rows are batched.
        return np.stack([L @ z for z in Z])

    chunks = [range(i, min(i + 256, n_samples)) for i in range(0, n_samples, 256)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(draw, chunks))
    else:
        parts = [draw(c) for c in chunks]
    values = np.concatenate(parts, axis=0)[:, column]
    return FieldSample(points=points, values=values, seed=seed, spec=spec,
                       applied_jitter=factor.applied_jitter)
