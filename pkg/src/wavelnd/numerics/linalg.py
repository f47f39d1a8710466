"""Jittered Cholesky factorization and Schur-complement conditional variance."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg as sla

from .errors import NotPSDError, NumericsError

JITTER_START = 1e-12
JITTER_CEILING = 1e-8


@dataclass(frozen=True)
class JitterPolicy:
    """Relative diagonal inflation ladder: 0, then start, start*10, ... up to ceiling
    (all multiplied by the largest diagonal entry)."""

    start: float = JITTER_START
    ceiling: float = JITTER_CEILING
    factor: float = 10.0

    def ladder(self):
        yield 0.0
        j = self.start
        while j <= self.ceiling * (1 + 1e-12):
            yield j
            j *= self.factor


@dataclass(frozen=True)
class PsdFactorization:
    lower_factor: np.ndarray
    applied_jitter: float
    dimension: int

    def reconstruct(self) -> np.ndarray:
        return self.lower_factor @ self.lower_factor.T


def _ldl_pivots(A: np.ndarray) -> np.ndarray:
    """Pivots of an unpivoted LDL^T sweep; used only to diagnose failures."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    d = np.empty(n)
    for j in range(n):
        d[j] = A[j, j]
        if j + 1 < n and d[j] != 0:
            col = A[j + 1:, j] / d[j]
            A[j + 1:, j + 1:] -= d[j] * np.outer(col, col)
    return d


def factor_psd(A, jitter_policy: JitterPolicy = JitterPolicy()) -> PsdFactorization:
    """Lower Cholesky factor of ``A + j I`` for the smallest ``j`` on the jitter ladder
    that succeeds.

    Raises
    ------
    NotPSDError
        If the factorization fails at the ceiling; reports the most negative pivot.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise NumericsError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    scale = float(np.max(np.abs(A))) if A.size else 0.0
    if n and not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(scale, 1e-300)):
        raise NumericsError("matrix is not symmetric within 1e-12 * max|A|")
    if not np.all(np.isfinite(A)):
        raise NumericsError("matrix has non-finite entries")
    max_diag = float(np.max(np.diag(A))) if n else 0.0
    if n and max_diag <= 0:
        if np.all(A == 0):
            return PsdFactorization(np.zeros_like(A), 0.0, n)
        raise NotPSDError("matrix not PSD within tolerance", min_pivot=float(np.min(np.diag(A))))
    eye = np.eye(n)
    for rel in jitter_policy.ladder():
        j = rel * max_diag
        try:
            L = sla.cholesky(A + j * eye, lower=True, check_finite=False)
        except sla.LinAlgError:
            continue
        return PsdFactorization(L, j, n)
    pivots = _ldl_pivots(A + jitter_policy.ceiling * max_diag * eye)
    raise NotPSDError(
        f"matrix not PSD within tolerance; most negative pivot {pivots.min():.6g}",
        min_pivot=float(pivots.min()))


def schur_conditional_variance(C, jitter_policy: JitterPolicy = JitterPolicy()) -> float:
    """c00 - c^T C11^{-1} c for ``C = [[c00, c^T], [c, C11]]`` (target at index 0).

    The conditioning block is factored with :func:`factor_psd`; the residual is
    clamped at zero once it is within rounding of it.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    c00 = float(C[0, 0])
    if C.shape[0] == 1:
        return c00
    c = C[1:, 0]
    fac = factor_psd(C[1:, 1:], jitter_policy)
    y = sla.solve_triangular(fac.lower_factor, c, lower=True, check_finite=False)
    resid = c00 - float(y @ y)
    if resid < -1e-9 * abs(c00):
        raise NotPSDError(
            f"negative conditional variance {resid:.3g} (c00={c00:.3g})", min_pivot=resid)
    return max(resid, 0.0)
