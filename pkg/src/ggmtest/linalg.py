"""Dense symmetric linear algebra used by the test statistics.

The factorization work is delegated to LAPACK through numpy; this module
adds the input validation and the positive-definiteness semantics the
statistics rely on.  A factorization is rejected when any squared pivot
falls at or below ``1e-12 * trace(a) / dim``, which catches matrices that
LAPACK technically factors but that are singular for our purposes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NotPositiveDefinite

_PIVOT_RTOL = 1e-12
_SYM_RTOL = 1e-10


@dataclass(frozen=True)
class SpdFactor:
    """Lower-triangular Cholesky factor L of an SPD matrix, a = L @ L.T."""

    lower: np.ndarray

    @property
    def dim(self) -> int:
        return self.lower.shape[0]


def _as_square(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise DomainError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def cholesky(a) -> SpdFactor:
    """Factor a symmetric positive definite matrix.

    Raises NotPositiveDefinite when the factorization fails or any pivot
    is too small relative to the matrix scale.
    """
    arr = _as_square(a, "cholesky input")
    scale = np.abs(arr).max()
    if np.abs(arr - arr.T).max() > _SYM_RTOL * max(scale, 1e-30):
        raise DomainError("cholesky input is not symmetric")
    try:
        lower = np.linalg.cholesky(arr)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc
    dim = arr.shape[0]
    threshold = _PIVOT_RTOL * np.trace(arr) / dim
    pivots = np.diag(lower) ** 2
    if not (pivots > threshold).all():
        raise NotPositiveDefinite("matrix is numerically singular")
    lower = lower.copy()
    lower.setflags(write=False)
    return SpdFactor(lower)


def log_det(factor: SpdFactor) -> float:
    """Log determinant of the factored matrix, 2 * sum(log diag(L))."""
    diag = np.diag(factor.lower)
    return 2.0 * float(np.sum(np.log(diag)))


def _as_data(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DomainError(f"{name} must be a 2-d observation matrix, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DomainError(f"{name} contains non-finite entries")
    return arr


def mean_vector(x) -> np.ndarray:
    """Column means of an observations-by-variables matrix."""
    arr = _as_data(x, "mean_vector input")
    return arr.mean(axis=0)


def covariance_mle(x, center) -> np.ndarray:
    """Covariance about a given center with divisor n (not n - 1)."""
    arr = _as_data(x, "covariance_mle input")
    mu = np.asarray(center, dtype=float)
    if mu.shape != (arr.shape[1],):
        raise DomainError(
            f"center has shape {mu.shape}, expected ({arr.shape[1]},)"
        )
    if not np.isfinite(mu).all():
        raise DomainError("center contains non-finite entries")
    dev = arr - mu
    return dev.T @ dev / arr.shape[0]
