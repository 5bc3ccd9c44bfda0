"""Synthetic instances: Gaussian DN data, log-normal Poisson counts, the
unit-roots Poisson hard instance and the stacked scaled identity."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .glm import log_poisson_nll

MAX_STACKED_ROWS = 1_000_000


def random_dag_coefficients(d, density=0.5, scale=1.0, seed=0) -> np.ndarray:
    """Strictly upper-triangular weights; entry (j, i) feeds variable j into i."""
    rng = np.random.default_rng(seed)
    B = rng.uniform(-scale, scale, size=(d, d))
    B *= rng.random((d, d)) < density
    return np.triu(B, k=1)


def planted_means(coefficients, intercepts) -> np.ndarray:
    B = np.asarray(coefficients, dtype=np.float64)
    mu = np.zeros(B.shape[0])
    for i in range(B.shape[0]):
        mu[i] = intercepts[i] + mu[:i] @ B[:i, i]
    return mu


def generate_gaussian_dn_data(
    d: int, n: int, coefficients=None, noise: float = 1.0, seed=0, intercepts=None
) -> np.ndarray:
    """Ancestral sampling from a linear Gaussian DAG in column order.

    ``x_i = intercept_i + sum_{j<i} B[j, i] x_j + N(0, noise^2)``. The
    coefficient matrix must be strictly upper triangular; a random one is
    drawn from ``seed`` when omitted.
    """
    if d < 2 or n < 1:
        raise ValueError("need d >= 2 and n >= 1")
    rng = np.random.default_rng(seed)
    if coefficients is None:
        coefficients = random_dag_coefficients(d, seed=rng.integers(2**32))
    B = np.asarray(coefficients, dtype=np.float64)
    if B.shape != (d, d):
        raise ValueError(f"coefficients must be {d}x{d}")
    if np.any(np.tril(B) != 0):
        raise ValueError("coefficients must be strictly upper triangular (acyclic)")
    b = np.zeros(d) if intercepts is None else np.asarray(intercepts, dtype=np.float64)
    X = np.empty((n, d))
    E = noise * rng.standard_normal((n, d))
    for i in range(d):
        X[:, i] = b[i] + X[:, :i] @ B[:i, i] + E[:, i]
    return X


def inject_high_leverage_rows(X, count: int, scale: float = 20.0, seed=0) -> np.ndarray:
    """Replace ``count`` random rows with large, structure-free rows.

    The rows are i.i.d. Gaussian with standard deviation ``scale`` times the
    column scale of X, so they dominate the full-data fit and carry leverage
    close to one.
    """
    rng = np.random.default_rng(seed)
    X = np.array(X, dtype=np.float64)
    n, d = X.shape
    if not 0 <= count <= n:
        raise ValueError("count must be between 0 and n")
    rows = rng.choice(n, size=count, replace=False)
    X[rows] = X.mean(axis=0) + scale * X.std(axis=0) * rng.standard_normal((count, d))
    return X


def generate_lognormal_poisson(X, gamma, sigma: float = 1.0, seed=0) -> np.ndarray:
    """Counts ``y ~ Poisson(exp(X gamma + v))`` with ``v ~ N(-sigma^2/2, sigma^2)``.

    The offset keeps ``E[y | x] = exp(x gamma)``; ``sigma = 0`` is the plain
    Poisson model.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    rng = np.random.default_rng(seed)
    eta = X @ np.asarray(gamma, dtype=np.float64)
    if sigma > 0:
        eta = eta + rng.normal(-0.5 * sigma**2, sigma, size=eta.shape)
    return rng.poisson(np.exp(eta)).astype(np.int64)


def generate_poisson_dn_data(d, n, gamma=None, sigma=0.0, seed=0, base_rate=1.0):
    """Counts for a DAG of log-linear Poisson conditionals.

    Parents enter through ``log1p`` of their counts so rates stay bounded.
    Returns ``(X, gamma)``, where ``gamma`` is strictly upper triangular.
    """
    rng = np.random.default_rng(seed)
    if gamma is None:
        gamma = random_dag_coefficients(d, density=0.5, scale=0.5, seed=rng.integers(2**32))
    gamma = np.asarray(gamma, dtype=np.float64)
    X = np.zeros((n, d))
    for i in range(d):
        eta = math.log(base_rate) + np.log1p(X[:, :i]) @ gamma[:i, i]
        if sigma > 0:
            eta = eta + rng.normal(-0.5 * sigma**2, sigma, size=n)
        X[:, i] = rng.poisson(np.exp(eta))
    return X, gamma


@dataclass(frozen=True)
class HardInstance:
    """Points ``(r cos(2 pi i/n), r sin(2 pi i/n), -1)`` for every set bit.

    ``queries[j] = (cos(2 pi j/n), sin(2 pi j/n), r cos(2 pi/n))`` is the
    hyperplane through the two neighbours of vertex j.
    """

    n: int
    bits: np.ndarray
    radius: float
    all_points: np.ndarray
    queries: np.ndarray

    @property
    def present(self) -> np.ndarray:
        return np.flatnonzero(self.bits)

    @property
    def X(self) -> np.ndarray:
        return self.all_points[self.present]

    @property
    def y(self) -> np.ndarray:
        return np.ones(self.present.size)

    @property
    def threshold(self) -> float:
        """Upper bound ``2n + 2nr`` on the NLL of a query whose vertex is absent."""
        return 2 * self.n + 2 * self.n * self.radius

    def log_nll(self, j: int, drop=()) -> float:
        """Log Poisson NLL of query j on the present points minus ``drop``."""
        keep = [i for i in self.present if i not in set(drop)]
        if not keep:
            return -math.inf
        X = self.all_points[keep]
        return log_poisson_nll(self.queries[j], X, np.ones(len(keep)))

    def classify(self, j: int, drop=()) -> bool:
        """True when the NLL at query j exceeds the absent-vertex bound."""
        return self.log_nll(j, drop) > math.log(self.threshold)


def hard_instance_radius(n: int) -> float:
    return n / (1.0 - math.cos(2.0 * math.pi / n))


def generate_hard_instance(n: int, bits=None, seed=0) -> HardInstance:
    if n < 3:
        raise ValueError("the polygon needs n >= 3")
    if bits is None:
        bits = np.random.default_rng(seed).integers(0, 2, size=n)
    bits = np.asarray(bits, dtype=np.int64).ravel()
    if bits.shape != (n,) or np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be a 0/1 vector of length n")
    r = hard_instance_radius(n)
    ang = 2.0 * math.pi * np.arange(n) / n
    pts = np.column_stack([r * np.cos(ang), r * np.sin(ang), -np.ones(n)])
    queries = np.column_stack(
        [np.cos(ang), np.sin(ang), np.full(n, r * math.cos(2.0 * math.pi / n))]
    )
    return HardInstance(n=n, bits=bits, radius=r, all_points=pts, queries=queries)


def separation_report(inst: HardInstance) -> dict:
    """Log-domain NLL per query plus the separation summary."""
    n = inst.n
    rows = []
    for j in range(n):
        lv = inst.log_nll(j)
        row = {
            "query": j,
            "bit": int(inst.bits[j]),
            "log_nll": lv,
            "classified_present": lv > math.log(inst.threshold),
        }
        if inst.bits[j]:
            row["log_nll_without_point"] = inst.log_nll(j, drop=(j,))
            row["classified_present_without_point"] = inst.classify(j, drop=(j,))
        rows.append(row)
    present = [r["log_nll"] for r in rows if r["bit"]]
    absent = [r["log_nll"] for r in rows if not r["bit"]]
    return {
        "n": n,
        "radius": inst.radius,
        "log_threshold": math.log(inst.threshold),
        "log_lower_bound_present": n / 2,
        "log_upper_bound_absent": math.log(4 * n**4),
        "min_present_log_nll": min(present) if present else None,
        "max_absent_log_nll": max(absent) if absent else None,
        "all_classified_correctly": all(r["classified_present"] == bool(r["bit"]) for r in rows),
        "queries": rows,
    }


def generate_stacked_identity(d: int, m: int, max_rows: int = MAX_STACKED_ROWS) -> np.ndarray:
    """``I_d / sqrt(d^(m-1))`` stacked ``d^(m-1)`` times: a ``d^m x d`` matrix
    with orthonormal columns and every leverage score equal to ``1/d^m``."""
    if d < 2 or m < 1:
        raise ValueError("need d >= 2 and m >= 1")
    if d**m > max_rows:
        raise DataError(f"d^m = {d**m} rows exceeds the limit of {max_rows}")
    reps = d ** (m - 1)
    return np.tile(np.eye(d) / math.sqrt(reps), (reps, 1))
