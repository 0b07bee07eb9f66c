"""Dense linear algebra for small symmetric positive definite matrices.

Everything here operates on matrices of modest dimension (patch covariances,
d of a few hundred at most), stored dense row-major.  Factorizations go
through one Cholesky decomposition per matrix, cached on the ``SpdMatrix``;
no explicit inverses are ever formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NotPositiveDefinite

__all__ = [
    "SpdMatrix",
    "CholeskyFactor",
    "cholesky",
    "mahalanobis",
    "logdet",
    "solve_spd",
]


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor L with strictly positive diagonal, A = L L^T."""

    dim: int
    lower: np.ndarray


class SpdMatrix:
    """Symmetric positive definite matrix.

    Symmetry is enforced on construction by averaging with the transpose,
    so downstream consumers never see an asymmetric scatter matrix.
    Positive definiteness is verified lazily: the first operation needing
    a factorization raises :class:`NotPositiveDefinite` if any Cholesky
    pivot falls at or below ``1e-14 * trace / dim``.
    """

    __slots__ = ("entries", "_chol")

    def __init__(self, entries):
        a = np.asarray(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if a.shape[0] < 1:
            raise ValueError("matrix dimension must be >= 1")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix entries must be finite")
        a = 0.5 * (a + a.T)
        a.setflags(write=False)
        self.entries = a
        self._chol = None

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def cholesky_lower(self) -> np.ndarray:
        """Cached lower Cholesky factor (raises NotPositiveDefinite)."""
        if self._chol is None:
            self._chol = _factor(self.entries)
        return self._chol

    @classmethod
    def identity(cls, d: int) -> "SpdMatrix":
        return cls(np.eye(d))

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim})"


def _pivot_floor(a: np.ndarray) -> float:
    # relative to trace/d so the threshold scales with data magnitude
    d = a.shape[0]
    return 1e-14 * float(np.trace(a)) / d


def _factor(a: np.ndarray) -> np.ndarray:
    floor = _pivot_floor(a)
    try:
        lower = scipy.linalg.cholesky(a, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    # pivots are the squared diagonal entries of L
    if float(np.min(np.diag(lower)) ** 2) <= floor:
        raise NotPositiveDefinite(
            f"smallest Cholesky pivot at or below threshold {floor:g}"
        )
    return lower


def _as_spd(m) -> SpdMatrix:
    return m if isinstance(m, SpdMatrix) else SpdMatrix(m)


def cholesky(m) -> CholeskyFactor:
    """Lower Cholesky factor of an SPD matrix, m = L L^T."""
    m = _as_spd(m)
    return CholeskyFactor(dim=m.dim, lower=m.cholesky_lower())


def mahalanobis(x, mu, m) -> float:
    """Quadratic form (x - mu)^T m^{-1} (x - mu) via one triangular solve."""
    m = _as_spd(m)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    mu = np.asarray(mu, dtype=np.float64).reshape(-1)
    if x.shape[0] != m.dim or mu.shape[0] != m.dim:
        raise ValueError("dimension mismatch between vectors and matrix")
    y = scipy.linalg.solve_triangular(
        m.cholesky_lower(), x - mu, lower=True, check_finite=False
    )
    return float(y @ y)


def logdet(m) -> float:
    """log determinant of an SPD matrix, 2 * sum(log diag(L))."""
    m = _as_spd(m)
    return 2.0 * float(np.sum(np.log(np.diag(m.cholesky_lower()))))


def solve_spd(m, b) -> np.ndarray:
    """Solve m y = b for SPD m using the cached Cholesky factor."""
    m = _as_spd(m)
    b = np.asarray(b, dtype=np.float64)
    lower = m.cholesky_lower()
    z = scipy.linalg.solve_triangular(lower, b, lower=True, check_finite=False)
    return scipy.linalg.solve_triangular(
        lower, z, lower=True, trans="T", check_finite=False
    )
