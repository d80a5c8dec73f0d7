"""
Dense singular values and the matrix norms used by every bound.

This module contains:
- as_matrix: Validate and coerce input to a finite float64 matrix
- singular_values: Descending singular values wrapped in a Spectrum
- schatten_power: ||W||_{s,p}^p, with the rank convention at p = 0
- spectral_norm, frobenius_norm, mixed_norm, two_to_inf_norm
- schatten_ratio: rho_p(W) = ||W||_{s,p}^p / ||W||_2^p
- spectrum_summary: Compact per-matrix record used in reports
"""

import logging
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from ..core.errors import DomainError, InputError
from ..utils.constants import F32_EPSILON, PACKAGE_LOGGER_NAME

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.analysis.spectral")


@dataclass(frozen=True)
class Spectrum:
    """Descending singular values of a ``rows x cols`` matrix.

    Attributes:
        values: Singular values, sorted descending, all >= 0. Length is
            ``min(rows, cols)``.
        rows: Row count of the source matrix.
        cols: Column count of the source matrix.
        rank_tol: Relative tolerance used only for the p = 0 rank count.
    """

    values: np.ndarray
    rows: int
    cols: int
    rank_tol: float

    def __post_init__(self) -> None:
        if len(self.values) != min(self.rows, self.cols):
            raise InputError(
                f"Spectrum has {len(self.values)} values for a "
                f"{self.rows}x{self.cols} matrix"
            )
        if not 0.0 < self.rank_tol < 1.0:
            raise DomainError(f"rank_tol must lie in (0, 1), got {self.rank_tol}")

    @property
    def sigma_max(self) -> float:
        return float(self.values[0]) if len(self.values) else 0.0

    @property
    def is_zero(self) -> bool:
        return self.sigma_max == 0.0


def default_rank_tol(rows: int, cols: int) -> float:
    """Relative rank tolerance: max(rows, cols) times single-precision epsilon."""
    return min(max(rows, cols) * F32_EPSILON, 0.5)


def as_matrix(m: ArrayLike) -> np.ndarray:
    """Return ``m`` as a finite 2-D float64 array or raise ``InputError``."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise InputError(f"Expected a 2-D matrix, got {arr.ndim} dimension(s)")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise InputError(f"Matrix must have positive dimensions, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError("Matrix contains non-finite entries (NaN or Inf)")
    return arr


def singular_values(m: ArrayLike, rank_tol: float | None = None) -> Spectrum:
    """Compute the singular values of ``m`` in float64.

    Round-off negatives are clamped to zero. ``rank_tol`` defaults to
    :func:`default_rank_tol` for the matrix shape.
    """
    arr = as_matrix(m)
    rows, cols = arr.shape
    values = np.linalg.svd(arr, compute_uv=False)
    values = np.sort(np.clip(values, 0.0, None))[::-1]
    tol = default_rank_tol(rows, cols) if rank_tol is None else float(rank_tol)
    return Spectrum(values=values, rows=rows, cols=cols, rank_tol=tol)


def _check_index(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 2.0:
        raise DomainError(f"Schatten index p must lie in [0, 2], got {p}")
    return p


def numerical_rank(s: Spectrum) -> int:
    """Count singular values above ``rank_tol * sigma_max`` (0 for the zero matrix)."""
    if s.is_zero:
        return 0
    return int(np.count_nonzero(s.values > s.rank_tol * s.sigma_max))


def schatten_power(s: Spectrum, p: float) -> float:
    """Return ||W||_{s,p}^p; at p = 0 return the numerical rank.

    Small singular values are never truncated for p > 0.
    """
    p = _check_index(p)
    if p == 0.0:
        return float(numerical_rank(s))
    return float(np.sum(s.values**p))


def spectral_norm(s: Spectrum) -> float:
    return s.sigma_max


def frobenius_norm(m: ArrayLike) -> float:
    return float(np.linalg.norm(as_matrix(m), ord="fro"))


def mixed_norm(m: ArrayLike, a: float, b: float) -> float:
    """Mixed (a, b)-norm: the l_b norm over columns of the columnwise l_a norms.

    The inner sum runs over the row index within each column.
    """
    if a < 1.0 or b < 1.0:
        raise DomainError(f"Mixed norm exponents must be >= 1, got ({a}, {b})")
    arr = as_matrix(m)
    column_norms = np.sum(np.abs(arr) ** a, axis=0) ** (1.0 / a)
    return float(np.sum(column_norms**b) ** (1.0 / b))


def two_to_inf_norm(m: ArrayLike) -> float:
    """Maximum Euclidean row norm."""
    return float(np.max(np.linalg.norm(as_matrix(m), axis=1)))


def schatten_ratio(s: Spectrum, p: float) -> float:
    """rho_p(W) = ||W||_{s,p}^p / ||W||_2^p, defined for nonzero W."""
    p = _check_index(p)
    if s.is_zero:
        raise DomainError("schatten_ratio is undefined for the zero matrix")
    return schatten_power(s, p) / s.sigma_max**p


def spectrum_summary(s: Spectrum) -> dict[str, Any]:
    """Summarize a spectrum for report records."""
    frob_sq = float(np.sum(s.values**2))
    return {
        "sigma_max": s.sigma_max,
        "sigma_min": float(s.values[-1]),
        "rank": numerical_rank(s),
        "stable_rank": frob_sq / s.sigma_max**2 if not s.is_zero else 0.0,
        "rank_tol": s.rank_tol,
    }
