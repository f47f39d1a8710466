"""Empirical checks of strong local nondeterminism.

The conditional variance of u at a target given nearby field values is compared
with the sphere integral of min_j |(t - t_j) + (x - x_j).w|^(2 - beta).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .field import (
    CovarianceCache,
    DomainBox,
    FieldError,
    FieldSpec,
    SpacetimePoint,
    covariance_matrix,
    l1_distance,
)
from .numerics import schur_conditional_variance
from .sampler import substream_seed

COINCIDENCE_TOL = 1e-9
DEGENERATE_TOL = 1e-30
MAX_CONDITIONING = 8


class LndError(ValueError):
    pass


@dataclass(frozen=True)
class SphereRule:
    """Equal-weight quadrature on S^{k-1}: the two points {-1, 1} for k = 1, uniform
    angles for k = 2, a Fibonacci lattice for k = 3."""

    k: int
    n_nodes: int = 0

    MIN_NODES = {1: 2, 2: 8, 3: 32}
    DEFAULT_NODES = {1: 2, 2: 512, 3: 4096}

    def __post_init__(self):
        if self.k not in (1, 2, 3):
            raise LndError(f"no sphere rule for k={self.k}")
        if self.n_nodes == 0:
            object.__setattr__(self, "n_nodes", self.DEFAULT_NODES[self.k])
        if self.k == 1 and self.n_nodes != 2:
            raise LndError("k = 1 sphere rule is exactly the two points {-1, 1}")
        if self.n_nodes < self.MIN_NODES[self.k]:
            raise LndError(
                f"sphere rule with {self.n_nodes} nodes is below the minimum "
                f"{self.MIN_NODES[self.k]} for k={self.k}")

    def nodes(self):
        """Unit vectors (n_nodes, k) and the common weight."""
        n = self.n_nodes
        if self.k == 1:
            return np.array([[-1.0], [1.0]]), 1.0
        if self.k == 2:
            th = 2.0 * np.pi * np.arange(n) / n
            return np.column_stack([np.cos(th), np.sin(th)]), 2.0 * np.pi / n
        i = np.arange(n) + 0.5
        z = 1.0 - 2.0 * i / n
        r = np.sqrt(1.0 - z * z)
        phi = np.pi * (1.0 + 5.0 ** 0.5) * i
        return np.column_stack([r * np.cos(phi), r * np.sin(phi), z]), 4.0 * np.pi / n

    def doubled(self) -> "SphereRule":
        return self if self.k == 1 else SphereRule(self.k, 2 * self.n_nodes)


def _offsets(target: SpacetimePoint, cond: Sequence[SpacetimePoint]):
    if not cond:
        raise LndError("conditioning set is empty")
    k = target.k
    if any(c.k != k for c in cond):
        raise LndError("conditioning points do not match the target dimension")
    dt = np.array([target.t - c.t for c in cond])
    dx = np.array([np.subtract(target.x, c.x) for c in cond]).reshape(len(cond), k)
    return dt, dx


def slnd_integral(target: SpacetimePoint, cond: Sequence[SpacetimePoint], beta: float,
                  rule: Optional[SphereRule] = None) -> float:
    """Integral over S^{k-1} of min_j |(t - t_j) + (x - x_j).w|^(2 - beta) dw."""
    dt, dx = _offsets(target, cond)
    rule = rule or SphereRule(target.k)
    if rule.k != target.k:
        raise LndError("sphere rule dimension does not match the points")
    w, weight = rule.nodes()
    vals = np.abs(dt[None, :] + w @ dx.T).min(axis=1)
    return float(weight * np.sum(vals ** (2.0 - beta)))


def sectorial_bound(target: SpacetimePoint, cond: Sequence[SpacetimePoint],
                    beta: float) -> float:
    """min_j |dt_j + dx_j|^(2-beta) + min_j |dt_j - dx_j|^(2-beta) (k = 1)."""
    if target.k != 1:
        raise LndError("the sectorial bound is defined for k = 1 only")
    dt, dx = _offsets(target, cond)
    dx = dx[:, 0]
    e = 2.0 - beta
    return float(np.min(np.abs(dt + dx)) ** e + np.min(np.abs(dt - dx)) ** e)


def _dedup(target: SpacetimePoint, cond: Sequence[SpacetimePoint]):
    seen = []
    for c in cond:
        if c not in seen:
            seen.append(c)
    return seen


def conditional_variance_points(spec: FieldSpec, target: SpacetimePoint,
                                cond: Sequence[SpacetimePoint],
                                cache: CovarianceCache | None = None) -> float:
    """Var(u(target) | u(c), c in cond) as a Schur complement.

    Conditioning points are deduplicated by exact coordinate equality; if the target
    itself is among them the result is 0.
    """
    cond = _dedup(target, cond)
    if target in cond:
        return 0.0
    C = covariance_matrix(spec, [target, *cond], cache)
    return schur_conditional_variance(C)


def nested_conditional_variances(spec: FieldSpec, target: SpacetimePoint,
                                 cond: Sequence[SpacetimePoint],
                                 cache: CovarianceCache | None = None) -> np.ndarray:
    """Conditional variances given cond[:1], cond[:2], ..., cond (one matrix)."""
    C = covariance_matrix(spec, [target, *cond], cache)
    out = np.empty(len(cond))
    for n in range(1, len(cond) + 1):
        if target in cond[:n]:
            out[n - 1] = 0.0
        else:
            out[n - 1] = schur_conditional_variance(C[: n + 1, : n + 1])
    return out


@dataclass(frozen=True)
class LndConfig:
    domain: DomainBox
    delta: Optional[float] = None
    n_conditioning: int = 4
    sphere_rule: Optional[SphereRule] = None
    trials: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.delta is None:
            object.__setattr__(self, "delta", self.domain.a / 2.0)
        if not self.delta > 0:
            raise LndError("delta must be positive")
        if not 1 <= self.n_conditioning <= MAX_CONDITIONING:
            raise LndError(f"n_conditioning must be in 1..{MAX_CONDITIONING}")
        if self.trials < 1:
            raise LndError("trials must be positive")


@dataclass
class LndReport:
    trials: list
    min_ratio: float
    argmin_trial: int
    ratio_quantiles: dict
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _draw_near(rng: np.random.Generator, target: SpacetimePoint, domain: DomainBox,
               delta: float) -> SpacetimePoint:
    """Uniform point of the l1 ball of radius delta around target, inside the box."""
    centre = target.as_array()
    for _ in range(100000):
        row = centre + rng.uniform(-delta, delta, centre.size)
        off = np.abs(row - centre).sum()
        if not COINCIDENCE_TOL <= off <= delta:
            continue
        p = SpacetimePoint.from_array(row)
        if domain.contains(p, tol=0.0):
            return p
    raise LndError("could not draw a conditioning point inside the box")


def _run_trial(spec: FieldSpec, config: LndConfig, index: int, bound_fn,
               cache: CovarianceCache | None) -> dict:
    rng = np.random.Generator(np.random.Philox(substream_seed(config.seed, index)))
    k = spec.k
    target = SpacetimePoint.from_array(config.domain.uniform(rng, k, 1)[0])
    n = int(rng.integers(1, config.n_conditioning + 1))
    cond = [_draw_near(rng, target, config.domain, config.delta) for _ in range(n)]
    cvs = nested_conditional_variances(spec, target, cond, cache)
    bounds = np.array([bound_fn(target, cond[: j + 1]) for j in range(n)])
    cv, bound = float(cvs[-1]), float(bounds[-1])
    scale = max(float(cvs[0]), 1e-300)
    rec = {
        "trial": index,
        "target": target.as_array().tolist(),
        "conditioning": [c.as_array().tolist() for c in cond],
        "conditional_variance": cv,
        "bound_integral": bound,
        "ratio": None,
        "skipped": False,
        "nested_variance_ok": bool(np.all(np.diff(cvs) <= 1e-9 * scale)),
        "nested_bound_ok": bool(np.all(np.diff(bounds) <= 1e-12 * max(bounds[0], 1e-300))),
    }
    if bound < DEGENERATE_TOL and cv < DEGENERATE_TOL:
        rec["skipped"] = True
    elif bound < DEGENERATE_TOL:
        rec["ratio"] = math.inf
    else:
        rec["ratio"] = cv / bound
    return rec


def _scan(spec: FieldSpec, config: LndConfig, bound_fn, threads: int,
          cache: CovarianceCache | None) -> LndReport:
    cache = cache if cache is not None else CovarianceCache()
    run = lambda i: _run_trial(spec, config, i, bound_fn, cache)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(run, range(config.trials)))
    else:
        records = [run(i) for i in range(config.trials)]
    ratios = np.array([r["ratio"] for r in records if not r["skipped"]], dtype=float)
    if ratios.size == 0:
        raise LndError("every trial was degenerate")
    finite = ratios[np.isfinite(ratios)]
    valid = [r for r in records if not r["skipped"]]
    best = min(valid, key=lambda r: r["ratio"])
    qs = [0.0, 0.05, 0.25, 0.5, 0.75, 0.95]
    by_n: dict = {}
    for r in valid:
        by_n.setdefault(len(r["conditioning"]), []).append(r["ratio"])
    return LndReport(
        trials=records,
        min_ratio=float(best["ratio"]),
        argmin_trial=int(best["trial"]),
        ratio_quantiles={f"q{int(q * 100):02d}": float(np.quantile(finite, q)) for q in qs},
        diagnostics={
            "skipped": sum(r["skipped"] for r in records),
            "nested_variance_violations": sum(not r["nested_variance_ok"] for r in records),
            "nested_bound_violations": sum(not r["nested_bound_ok"] for r in records),
            "min_ratio_by_n": {str(n): float(min(v)) for n, v in sorted(by_n.items())},
            "delta": config.delta,
        },
    )


def slnd_ratio_scan(spec: FieldSpec, config: LndConfig, threads: int = 1,
                    cache: CovarianceCache | None = None) -> LndReport:
    """Ratio of conditional variance to the sphere-integral bound over random
    configurations within distance delta of the target."""
    rule = config.sphere_rule or SphereRule(spec.k)
    bound_fn = lambda tg, cd: slnd_integral(tg, cd, spec.beta, rule)
    return _scan(spec, config, bound_fn, threads, cache)


def sectorial_check_k1(spec: FieldSpec, config: LndConfig, threads: int = 1,
                       cache: CovarianceCache | None = None) -> LndReport:
    """Same scan as :func:`slnd_ratio_scan` with the two-characteristic bound."""
    if spec.k != 1:
        raise LndError("sectorial check requires k = 1")
    bound_fn = lambda tg, cd: sectorial_bound(tg, cd, spec.beta)
    return _scan(spec, config, bound_fn, threads, cache)


def dyadic_shrink(domain: DomainBox, k: int, delta: Optional[float] = None) -> float:
    """delta' = min(delta / (1 + sqrt k), a' - a, 2b) with delta = a/2 by default."""
    delta = domain.a / 2.0 if delta is None else delta
    return min(delta / (1.0 + math.sqrt(k)), domain.a_prime - domain.a, 2.0 * domain.b)


def diagonal_grid(domain: DomainBox, k: int, n: int, delta: Optional[float] = None) -> list:
    """Points t = a + i delta' 2^-n, x_j = -b + i delta' 2^-n for i = 0..2^n."""
    dp = dyadic_shrink(domain, k, delta)
    h = dp * 2.0 ** (-n)
    return [SpacetimePoint(domain.a + i * h, (-domain.b + i * h,) * k)
            for i in range(2 ** n + 1)]


def proof_grid_conditional_check(spec: FieldSpec, domain: DomainBox, n_levels: int,
                                 C2: float, cache: CovarianceCache | None = None,
                                 budget: int = 3000) -> dict:
    """Var(u at the last diagonal grid point | all earlier ones) / eps_n^2, n = 0..n_levels.

    eps_n^2 = C2 ((1 + k) delta')^(2 - beta) 2^(-(2 - beta) n).
    """
    if not C2 > 0:
        raise LndError("C2 must be positive")
    if 2 ** n_levels + 1 > budget:
        raise LndError(f"level {n_levels} needs {2 ** n_levels + 1} points, over {budget}")
    k, e = spec.k, spec.holder_exponent
    dp = dyadic_shrink(domain, k)
    levels = []
    for n in range(n_levels + 1):
        pts = diagonal_grid(domain, k, n)
        target, cond = pts[-1], pts[:-1]
        C = covariance_matrix(spec, [target, *cond], cache)
        cv = schur_conditional_variance(C)
        eps2 = C2 * ((1.0 + k) * dp) ** e * 2.0 ** (-e * n)
        levels.append({
            "n": n,
            "n_points": len(pts),
            "conditional_variance": cv,
            "epsilon_sq": eps2,
            "ratio": cv / eps2,
            "slnd_bound": slnd_integral(target, cond, spec.beta),
        })
    ratios = [lv["ratio"] for lv in levels]
    return {
        "delta_prime": dp,
        "C2": C2,
        "levels": levels,
        "min_ratio": float(min(ratios)),
        "max_ratio": float(max(ratios)),
    }
