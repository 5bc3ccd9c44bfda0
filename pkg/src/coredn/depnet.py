"""Dependency networks built from d per-variable GLMs.

Each variable ``i`` gets a regression on every other column (plus an
intercept by default). Training on a WeightedCoreset uses its row weights, so
a single coreset drawn on the column space of the whole data matrix serves all
d regressions.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gammaln

from .coreset import WeightedCoreset
from .errors import CoreDNError, DataError, TrainingError
from .glm import (
    ETA_CLAMP,
    GAUSSIAN,
    POISSON,
    check_counts,
    check_family,
    fit_gaussian,
    fit_poisson,
)
from .matrix_core import as_data_matrix

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True, eq=False)
class DependencyNetwork:
    """Per-variable GLM coefficients.

    ``coefficients[i]`` holds the weights of the d-1 other variables in their
    original order; ``intercepts[i]`` is the bias term (zero when
    ``intercept`` is False).
    """

    family: str
    coefficients: tuple
    intercepts: np.ndarray
    intercept: bool = True
    variable_names: tuple | None = None
    converged: tuple = ()

    def __post_init__(self):
        check_family(self.family)
        d = len(self.coefficients)
        if d < 2:
            raise DataError("a dependency network needs at least two variables")
        for i, c in enumerate(self.coefficients):
            if c.shape != (d - 1,):
                raise DataError(f"variable {i}: expected {d - 1} coefficients, got {c.shape}")
            if not np.all(np.isfinite(c)):
                raise DataError(f"variable {i}: non-finite coefficient")
        if self.intercepts.shape != (d,) or not np.all(np.isfinite(self.intercepts)):
            raise DataError("intercepts must be a finite length-d vector")
        if self.variable_names is not None and len(self.variable_names) != d:
            raise DataError("variable_names length must equal d")

    @property
    def d(self) -> int:
        return len(self.coefficients)

    @cached_property
    def _weights(self) -> np.ndarray:
        d = self.d
        W = np.zeros((d, d))
        for i, c in enumerate(self.coefficients):
            W[np.arange(d) != i, i] = c
        W.flags.writeable = False
        return W

    def weight_matrix(self) -> np.ndarray:
        """d x d matrix with entry (j, i) = weight of variable j in model i."""
        return self._weights.copy()

    def linear_predictor(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return X @ self._weights + self.intercepts

    # --- serialisation -------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "d": self.d,
            "intercept": self.intercept,
            "variable_names": list(self.variable_names) if self.variable_names else None,
            "intercepts": [float(v) for v in self.intercepts],
            "coefficients": [[float(v) for v in c] for c in self.coefficients],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "DependencyNetwork":
        coefs = tuple(np.asarray(c, dtype=np.float64) for c in obj["coefficients"])
        if len(coefs) != obj["d"]:
            raise DataError("model file: 'd' disagrees with coefficient count")
        names = obj.get("variable_names")
        return cls(
            family=obj["family"],
            coefficients=coefs,
            intercepts=np.asarray(obj["intercepts"], dtype=np.float64),
            intercept=bool(obj.get("intercept", True)),
            variable_names=tuple(names) if names else None,
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "DependencyNetwork":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def zero_network(family: str, d: int, intercept: bool = True) -> DependencyNetwork:
    return DependencyNetwork(
        family=family,
        coefficients=tuple(np.zeros(d - 1) for _ in range(d)),
        intercepts=np.zeros(d),
        intercept=intercept,
    )


def network_from_matrix(family, W, intercepts=None, intercept=True, variable_names=None):
    """Build a network from a d x d weight matrix (diagonal ignored)."""
    W = np.asarray(W, dtype=np.float64)
    d = W.shape[0]
    coefs = tuple(W[np.arange(d) != i, i].copy() for i in range(d))
    b = np.zeros(d) if intercepts is None else np.asarray(intercepts, dtype=np.float64)
    return DependencyNetwork(family, coefs, b, intercept, variable_names)


def _unpack(data):
    if isinstance(data, WeightedCoreset):
        return data.data, data.weights
    return as_data_matrix(data), None


def _design(X, i, intercept):
    others = np.delete(X, i, axis=1)
    if intercept:
        return np.hstack([np.ones((X.shape[0], 1)), others])
    return others


def train(
    data,
    family: str = GAUSSIAN,
    *,
    intercept: bool = True,
    weights=None,
    variable_names=None,
    workers: int = 1,
    max_iter: int = 100,
    tol: float = 1e-8,
) -> DependencyNetwork:
    """Fit one GLM per variable on a data matrix or a WeightedCoreset."""
    check_family(family)
    X, w = _unpack(data)
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64)
    n, d = X.shape
    if d < 2:
        raise DataError("training a dependency network needs d >= 2")
    if family == POISSON:
        check_counts(X, "data")
    if w is None:
        w = np.ones(n)

    def fit_one(i):
        A = _design(X, i, intercept)
        try:
            if family == GAUSSIAN:
                return fit_gaussian(A, X[:, i], w)
            return fit_poisson(
                A, X[:, i], w, max_iter=max_iter, tol=tol,
                intercept_index=0 if intercept else None,
            )
        except CoreDNError as exc:
            raise TrainingError(str(exc), variable=i) from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fits = list(pool.map(fit_one, range(d)))
    else:
        fits = [fit_one(i) for i in range(d)]

    coefs, b = [], np.zeros(d)
    for i, f in enumerate(fits):
        if not np.all(np.isfinite(f.coefficients)):
            raise TrainingError("non-finite coefficients", variable=i)
        if intercept:
            b[i] = f.coefficients[0]
            coefs.append(f.coefficients[1:].copy())
        else:
            coefs.append(f.coefficients.copy())
    return DependencyNetwork(
        family=family,
        coefficients=tuple(coefs),
        intercepts=b,
        intercept=intercept,
        variable_names=tuple(variable_names) if variable_names else None,
        converged=tuple(f.converged for f in fits),
    )


def _weights_for(X, weights):
    if weights is None:
        return np.ones(X.shape[0])
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.shape[0] != X.shape[0]:
        raise DataError("weights length must equal the number of rows")
    return w


def per_variable_losses(dn: DependencyNetwork, X, weights=None) -> np.ndarray:
    """Length-d vector of per-variable losses.

    Gaussian: weighted squared residuals. Poisson: weighted Poisson NLL.
    """
    X, w0 = _unpack(X)
    w = _weights_for(X, weights if weights is not None else w0)
    if X.shape[1] != dn.d:
        raise DataError(f"data has {X.shape[1]} columns, network has {dn.d}")
    eta = dn.linear_predictor(X)
    if dn.family == GAUSSIAN:
        r = eta - X
        return w @ (r * r)
    check_counts(X, "data")
    terms = np.exp(np.minimum(eta, ETA_CLAMP)) - X * eta + gammaln(X + 1.0)
    return w @ terms


def gdn_loss(dn: DependencyNetwork, X, weights=None) -> float:
    """Sum over variables of (weighted) squared regression residuals."""
    if dn.family != GAUSSIAN:
        raise CoreDNError("the GDN loss is defined for Gaussian networks only")
    return float(per_variable_losses(dn, X, weights).sum())


def neg_log_pseudo_likelihood(dn: DependencyNetwork, X, weights=None) -> float:
    """Negative log pseudo-likelihood with unit Gaussian variance."""
    losses = per_variable_losses(dn, X, weights)
    if dn.family == POISSON:
        return float(losses.sum())
    Xm, w0 = _unpack(X)
    total_w = float(_weights_for(Xm, weights if weights is not None else w0).sum())
    return 0.5 * float(losses.sum()) + 0.5 * total_w * dn.d * _LOG_2PI


def predict(dn: DependencyNetwork, X) -> np.ndarray:
    """Conditional mean of every entry given the rest of its row."""
    X = as_data_matrix(X)
    eta = dn.linear_predictor(X)
    if dn.family == GAUSSIAN:
        return eta
    return np.exp(np.minimum(eta, ETA_CLAMP))


def residual_variances(dn: DependencyNetwork, X, weights=None) -> np.ndarray:
    """Weighted mean squared residual per variable; reporting only."""
    if dn.family != GAUSSIAN:
        raise CoreDNError("residual variances are defined for Gaussian networks only")
    Xm, w0 = _unpack(X)
    w = _weights_for(Xm, weights if weights is not None else w0)
    return per_variable_losses(dn, X, weights) / w.sum()


# --- pseudo-Gibbs sampling ---------------------------------------------


@dataclass(frozen=True)
class GibbsState:
    current: np.ndarray
    step: int = 0
    seed: int = 0


def _step_rng(state):
    return np.random.default_rng([state.seed, state.step])


def gibbs_step(dn: DependencyNetwork, state: GibbsState) -> GibbsState:
    """One sweep over variables 0..d-1, resampling each from its conditional.

    Randomness is derived from ``(seed, step)``, so a trajectory is a pure
    function of the initial state.
    """
    x = np.array(state.current, dtype=np.float64)
    if x.shape != (dn.d,) or not np.all(np.isfinite(x)):
        raise DataError("Gibbs state must be a finite length-d vector")
    rng = _step_rng(state)
    W = dn._weights
    b = dn.intercepts
    for i in range(dn.d):
        eta = float(x @ W[:, i] + b[i])
        if dn.family == GAUSSIAN:
            x[i] = eta + rng.standard_normal()
        else:
            rate = math.exp(min(eta, ETA_CLAMP))
            if not math.isfinite(rate):
                raise CoreDNError(f"variable {i}: non-finite Poisson rate")
            x[i] = float(rng.poisson(rate))
    return GibbsState(current=x, step=state.step + 1, seed=state.seed)


def gibbs_chain(dn, n_sweeps: int, seed: int = 0, init=None, burn_in: int = 0) -> np.ndarray:
    """Run ``burn_in + n_sweeps`` sweeps and return the last ``n_sweeps`` states."""
    x0 = np.zeros(dn.d) if init is None else np.asarray(init, dtype=np.float64)
    state = GibbsState(current=x0, step=0, seed=seed)
    out = np.empty((n_sweeps, dn.d))
    for t in range(burn_in + n_sweeps):
        state = gibbs_step(dn, state)
        if t >= burn_in:
            out[t - burn_in] = state.current
    return out
