"""Leverage scores, Bernoulli sampling operators and subspace-embedding checks."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDrawError, ZeroRankError
from .matrix_core import ThinSVD, spectral_norm, thin_svd


@dataclass(frozen=True)
class LeverageProfile:
    scores: np.ndarray
    rank: int
    size_param: float
    probabilities: np.ndarray

    @property
    def expected_size(self) -> float:
        return float(self.probabilities.sum())


@dataclass(frozen=True)
class SamplingOperator:
    """Diagonal sampling matrix stored sparsely.

    Row ``indices[t]`` is kept with weight ``weights[t] = 1/q``; applying the
    operator to a squared loss multiplies that row's term by the weight (the
    diagonal entry itself is ``sqrt(weight)``).
    """

    indices: np.ndarray
    weights: np.ndarray
    origin_rows: int
    seed: int | None

    @property
    def size(self) -> int:
        return int(self.indices.shape[0])

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Return ``S @ X`` restricted to the selected rows."""
        return np.sqrt(self.weights)[:, None] * X[self.indices]


def leverage_scores(svd: ThinSVD) -> np.ndarray:
    """Squared row norms of U divided by the rank; they sum to one."""
    if svd.rank < 1:
        raise ZeroRankError("leverage scores need rank >= 1")
    return np.einsum("ij,ij->i", svd.U, svd.U) / svd.rank


def profile(X, size_param: float, rank_tol: float | None = None) -> LeverageProfile:
    svd = thin_svd(X) if rank_tol is None else thin_svd(X, rank_tol)
    scores = leverage_scores(svd)
    return LeverageProfile(
        scores=scores,
        rank=svd.rank,
        size_param=float(size_param),
        probabilities=sampling_probabilities(scores, size_param),
    )


def sampling_probabilities(scores, k: float) -> np.ndarray:
    """``q_i = min(1, k * l_i)``."""
    if k < 1:
        raise ValueError(f"size parameter k must be >= 1, got {k}")
    scores = np.asarray(scores, dtype=np.float64)
    return np.minimum(1.0, k * scores)


def recommended_size(rank: int, eps: float, const_D: float = 1.0) -> int:
    """``k = ceil(D * rank * ln(rank/eps) / eps**2)``; requires ``0 < eps < 1/2``."""
    if not 0.0 < eps < 0.5:
        raise ValueError(f"eps must lie in (0, 1/2), got {eps}")
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if not const_D > 0:
        raise ValueError("const_D must be positive")
    return int(math.ceil(const_D * rank * math.log(rank / eps) / eps**2))


def size_param_for_expected(scores, target: float, tol: float = 1e-10) -> float:
    """Find k >= 1 with ``sum_i min(1, k*l_i) == target`` by bisection.

    The expected size is capped by the number of rows with positive score; a
    larger target returns the smallest k that saturates every such row.
    """
    scores = np.asarray(scores, dtype=np.float64)
    pos = scores[scores > 0]
    if pos.size == 0:
        raise ZeroRankError("no row has positive leverage")
    # Nudged up so rounding in k * l_min cannot leave a row just below q = 1.
    k_sat = (1.0 + 1e-9) / pos.min()
    if target >= pos.size:
        return max(1.0, k_sat)
    lo, hi = 1.0, k_sat
    if np.minimum(1.0, lo * pos).sum() >= target:
        return lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.minimum(1.0, mid * pos).sum() < target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * hi:
            break
    return hi


def draw_sampling_operator(probabilities, seed=None) -> SamplingOperator:
    """Keep each row ``i`` independently with probability ``q_i``.

    Raises EmptyDrawError when nothing is selected; redrawing is the caller's
    decision.
    """
    q = np.asarray(probabilities, dtype=np.float64).ravel()
    if np.any(q < 0) or np.any(q > 1) or not np.all(np.isfinite(q)):
        raise ValueError("probabilities must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    u = rng.random(q.shape[0])
    keep = np.flatnonzero(u < q)
    if keep.size == 0:
        raise EmptyDrawError(f"sampling draw with seed {seed} selected no rows")
    return SamplingOperator(
        indices=keep,
        weights=1.0 / q[keep],
        origin_rows=int(q.shape[0]),
        seed=seed,
    )


def embedding_distortion(X, S: SamplingOperator, svd: ThinSVD | None = None) -> float:
    """``||U^T S^T S U - I||_2`` for an orthonormal basis U of col(X).

    This is the smallest eps for which
    ``(1-eps)||X g||^2 <= ||S X g||^2 <= (1+eps)||X g||^2`` holds for all g.
    """
    if svd is None:
        svd = thin_svd(X)
    if S.origin_rows != svd.U.shape[0]:
        raise ValueError(
            f"operator was drawn for {S.origin_rows} rows, matrix has {svd.U.shape[0]}"
        )
    Us = svd.U[S.indices]
    M = Us.T @ (S.weights[:, None] * Us)
    M[np.diag_indices_from(M)] -= 1.0
    return spectral_norm(M)
