"""Weighted maximum-likelihood fits for the Gaussian and Poisson conditionals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import DataError
from .matrix_core import solve_weighted_least_squares

GAUSSIAN = "gaussian"
POISSON = "poisson"
FAMILIES = (GAUSSIAN, POISSON)

ETA_CLAMP = 50.0
_ETA_FLOOR = -700.0
INIT_OFFSET = 1e-8


@dataclass(frozen=True)
class GlmFit:
    coefficients: np.ndarray
    family: str
    converged: bool
    iterations: int
    final_nll: float
    clamped: bool = False
    nll_history: tuple = ()


def check_family(family: str) -> str:
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    return family


def check_counts(y, what="y") -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if not np.all(np.isfinite(y)):
        raise DataError(f"{what} contains NaN or Inf")
    if np.any(y < 0):
        raise DataError(f"{what} contains negative counts")
    if np.any(y != np.floor(y)):
        raise DataError(f"{what} contains non-integer counts")
    return y


def _prepare(A, y, w):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    y = check_counts(y).ravel()
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=np.float64).ravel()
    if not (A.shape[0] == y.shape[0] == w.shape[0]):
        raise DataError("design, response and weights disagree in length")
    if np.any(w < 0):
        raise DataError("weights must be non-negative")
    return A, y, w


def _rate(eta):
    return np.exp(np.clip(eta, _ETA_FLOOR, ETA_CLAMP))


def _nll_change(eta, delta, y, w) -> float:
    """NLL(eta + delta) - NLL(eta) without subtracting two large totals."""
    lo = np.clip(eta, _ETA_FLOOR, ETA_CLAMP)
    hi = np.clip(eta + delta, _ETA_FLOOR, ETA_CLAMP)
    return float(np.sum(w * (np.exp(lo) * np.expm1(hi - lo) - y * delta)))


def poisson_nll(gamma, A, y, w=None) -> float:
    """``sum_i w_i [exp(a_i g) - y_i a_i g + ln(y_i!)]`` with the exponent capped at 50."""
    A, y, w = _prepare(A, y, w)
    eta = A @ np.asarray(gamma, dtype=np.float64)
    return float(np.sum(w * (_rate(eta) - y * eta + gammaln(y + 1.0))))


def poisson_nll_gradient(gamma, A, y, w=None) -> np.ndarray:
    A, y, w = _prepare(A, y, w)
    eta = A @ np.asarray(gamma, dtype=np.float64)
    return A.T @ (w * (_rate(eta) - y))


def log_poisson_nll(gamma, A, y, w=None) -> float:
    """Natural log of the unclamped Poisson NLL, evaluated without overflow.

    The exponential part is summed in log space, so linear predictors far
    beyond the float64 range of ``exp`` are fine.
    """
    A, y, w = _prepare(A, y, w)
    eta = A @ np.asarray(gamma, dtype=np.float64)
    pos = w > 0
    eta, y, w = eta[pos], y[pos], w[pos]
    if eta.size == 0:
        return -np.inf
    log_exp_part = float(logsumexp(eta, b=w))
    rest = float(np.sum(w * (gammaln(y + 1.0) - y * eta)))
    if rest >= 0:
        return float(np.logaddexp(log_exp_part, np.log(rest)) if rest > 0 else log_exp_part)
    # NLL is non-negative term by term, so the exponential part dominates.
    return log_exp_part + float(np.log1p(-np.exp(np.log(-rest) - log_exp_part)))


def _intercept_column(A):
    ones = np.flatnonzero(np.all(A == 1.0, axis=0))
    return int(ones[0]) if ones.size else None


def fit_poisson(
    A, y, w=None, max_iter: int = 100, tol: float = 1e-8, intercept_index="auto"
) -> GlmFit:
    """Poisson regression with log link by IRLS with step-halving.

    Starts from zero coefficients with the intercept (if any) at
    ``ln(weighted mean(y) + 1e-8)``. Stops when a full Newton step is below
    ``tol`` relative to the coefficients. When the objective stops changing
    the fit counts as converged if the gradient's max-norm is below
    ``sqrt(tol) * scale``. Line-search decisions use the exact change in NLL
    along the step rather than a difference of two totals.
    The best iterate is returned whether or not it converged; a fit whose
    linear predictor sits on the cap at every iteration is reported
    unconverged with ``clamped=True``.
    """
    A, y, w = _prepare(A, y, w)
    if not np.any(w > 0):
        raise DataError("at least one weight must be positive")
    p = A.shape[1]
    if intercept_index == "auto":
        intercept_index = _intercept_column(A)
    gamma = np.zeros(p)
    if intercept_index is not None:
        gamma[intercept_index] = np.log(np.sum(w * y) / np.sum(w) + INIT_OFFSET)

    scale = max(1.0, float(np.max(np.abs(A.T @ (w * y)))))
    nll = poisson_nll(gamma, A, y, w)
    history = [nll]
    converged = False
    always_clamped = True
    it = 0
    for it in range(1, max_iter + 1):
        eta = A @ gamma
        mu = _rate(eta)
        z = eta + (y - mu) / np.maximum(mu, np.finfo(float).tiny)
        try:
            proposal = solve_weighted_least_squares(A, z, w * mu)
        except DataError:
            break
        step = proposal - gamma
        direction = A @ step
        t = 1.0
        change = _nll_change(eta, direction, y, w)
        while not change <= 0.0 and t > 2.0**-40:
            t *= 0.5
            change = _nll_change(eta, t * direction, y, w)
        if not change <= 0.0:
            # No descent along the Newton direction: numerically stationary.
            grad = poisson_nll_gradient(gamma, A, y, w)
            converged = bool(np.max(np.abs(grad)) <= np.sqrt(tol) * scale)
            break
        gamma = gamma + t * step
        # Adding a non-positive change keeps the recorded NLL monotone.
        nll = nll + change
        history.append(nll)
        always_clamped = always_clamped and bool(np.any(A @ gamma > ETA_CLAMP))
        # Newton converges quadratically, so a tiny full step means the
        # remaining error is far below tol.
        if t == 1.0 and np.max(np.abs(step)) <= tol * (1.0 + np.max(np.abs(gamma))):
            converged = True
            break
        if change == 0.0:
            grad = poisson_nll_gradient(gamma, A, y, w)
            converged = bool(np.max(np.abs(grad)) <= np.sqrt(tol) * scale)
            break
    clamped = bool(np.any(A @ gamma > ETA_CLAMP))
    if clamped and always_clamped:
        converged = False
    return GlmFit(
        coefficients=gamma,
        family=POISSON,
        converged=converged,
        iterations=it,
        final_nll=nll,
        clamped=clamped,
        nll_history=tuple(history),
    )


def fit_gaussian(A, y, w=None) -> GlmFit:
    """Weighted least squares; ``final_nll`` is the weighted residual sum of squares."""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    y = np.asarray(y, dtype=np.float64).ravel()
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=np.float64).ravel()
    gamma = solve_weighted_least_squares(A, y, w)
    r = A @ gamma - y
    rss = float(np.sum(w * r * r))
    return GlmFit(
        coefficients=gamma,
        family=GAUSSIAN,
        converged=True,
        iterations=1,
        final_nll=rss,
        nll_history=(rss,),
    )


def fit(family, A, y, w=None, **kwargs) -> GlmFit:
    if check_family(family) == GAUSSIAN:
        return fit_gaussian(A, y, w)
    return fit_poisson(A, y, w, **kwargs)
