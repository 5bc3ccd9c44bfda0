"""Dense matrix primitives: validation, thin SVD with rank decision, norms and
weighted least squares.

A "data matrix" is a plain 2-D float64 numpy array with finite entries; rows
are instances and columns are variables.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, SpectralNormError, ZeroRankError

DEFAULT_RANK_TOL = 1e-12


def as_data_matrix(X, name="X") -> np.ndarray:
    """Validate ``X`` and return it as a C-contiguous float64 ``(n, d)`` array."""
    A = np.ascontiguousarray(X, dtype=np.float64)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise DataError(f"{name} must be 2-dimensional, got shape {A.shape}")
    if A.shape[0] < 1 or A.shape[1] < 1:
        raise DataError(f"{name} must have n >= 1 and d >= 1, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DataError(f"{name} contains NaN or Inf entries")
    return A


def with_intercept(X: np.ndarray) -> np.ndarray:
    """Prepend a column of ones."""
    return np.hstack([np.ones((X.shape[0], 1)), X])


@dataclass(frozen=True)
class ThinSVD:
    """Rank-truncated SVD ``X ~= U @ diag(singular_values) @ Vt``."""

    U: np.ndarray
    singular_values: np.ndarray
    Vt: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.singular_values.shape[0])

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.singular_values) @ self.Vt


def thin_svd(X, rank_tol: float = DEFAULT_RANK_TOL) -> ThinSVD:
    """Thin SVD keeping singular values above ``rank_tol * sigma_max``.

    Raises ZeroRankError for an all-zero matrix.
    """
    if not rank_tol > 0:
        raise ValueError("rank_tol must be positive")
    A = as_data_matrix(X)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise ZeroRankError("matrix has rank zero; leverage scores are undefined")
    rho = int(np.count_nonzero(s > rank_tol * s[0]))
    return ThinSVD(
        U=np.ascontiguousarray(U[:, :rho]),
        singular_values=s[:rho].copy(),
        Vt=np.ascontiguousarray(Vt[:rho]),
    )


def frobenius_norm(X) -> float:
    A = np.asarray(X, dtype=np.float64)
    return float(np.sqrt(np.sum(A * A)))


def _power_iteration(A, tol, max_iter, rng):
    # Largest eigenvalue of the Gram matrix via power iteration.
    G = A.T @ A if A.shape[0] >= A.shape[1] else A @ A.T
    v = rng.standard_normal(G.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = G @ v
        nrm = np.linalg.norm(w)
        if nrm == 0.0:
            return 0.0, True
        v = w / nrm
        new = float(v @ G @ v)
        if abs(new - lam) <= tol * max(abs(new), np.finfo(float).tiny):
            return float(np.sqrt(max(new, 0.0))), True
        lam = new
    return float(np.sqrt(max(lam, 0.0))), False


def spectral_norm(A, tol: float = 1e-9, max_iter: int = 10_000) -> float:
    """Largest singular value of ``A``.

    Uses LAPACK's SVD; if that fails to converge, falls back to power
    iteration and raises SpectralNormError (carrying the best estimate) when
    the iteration cap is reached.
    """
    M = np.asarray(A, dtype=np.float64)
    if M.ndim == 1:
        M = M.reshape(1, -1)
    if not np.all(np.isfinite(M)):
        raise DataError("matrix contains NaN or Inf entries")
    if M.size == 0:
        return 0.0
    try:
        return float(np.linalg.svd(M, compute_uv=False)[0])
    except np.linalg.LinAlgError:
        pass
    est, ok = _power_iteration(M, tol, max_iter, np.random.default_rng(0))
    if not ok:
        raise SpectralNormError(
            f"power iteration did not converge in {max_iter} iterations", est
        )
    return est


def solve_weighted_least_squares(A, b, w) -> np.ndarray:
    """Minimise ``sum_i w_i (a_i @ gamma - b_i)**2``.

    Rank-deficient problems get the minimum-norm minimiser.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    b = np.asarray(b, dtype=np.float64).ravel()
    w = np.asarray(w, dtype=np.float64).ravel()
    if not (A.shape[0] == b.shape[0] == w.shape[0]):
        raise DataError(
            f"length mismatch: A has {A.shape[0]} rows, b {b.shape[0]}, w {w.shape[0]}"
        )
    if np.any(w < 0) or not np.any(w > 0):
        raise DataError("weights must be non-negative with at least one positive")
    sw = np.sqrt(w)
    gamma, *_ = np.linalg.lstsq(A * sw[:, None], b * sw, rcond=None)
    return gamma
