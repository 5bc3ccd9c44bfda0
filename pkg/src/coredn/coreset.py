"""Weighted coresets: leverage-score sampling and the uniform baseline."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CSVParseError, DataError
from .leverage import (
    SamplingOperator,
    draw_sampling_operator,
    leverage_scores,
    recommended_size,
    sampling_probabilities,
    size_param_for_expected,
)
from .matrix_core import ThinSVD, as_data_matrix, thin_svd, with_intercept

LEVERAGE = "leverage"
UNIFORM = "uniform"


@dataclass(frozen=True, eq=False)
class WeightedCoreset:
    data: np.ndarray
    weights: np.ndarray
    source_indices: np.ndarray
    method: str
    seed: int | None = None
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.data.shape[0] < 1:
            raise DataError("coreset must contain at least one row")
        if self.weights.shape[0] != self.data.shape[0] or self.source_indices.shape[0] != self.data.shape[0]:
            raise DataError("coreset data, weights and indices disagree in length")
        if np.unique(self.source_indices).size != self.source_indices.size:
            raise DataError("coreset source indices must be distinct")

    @property
    def size(self) -> int:
        return int(self.data.shape[0])

    def to_csv(self, path, variable_names=None) -> None:
        d = self.data.shape[1]
        names = list(variable_names) if variable_names else [f"x{j}" for j in range(d)]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "weight", *names])
            for idx, w, row in zip(self.source_indices, self.weights, self.data):
                writer.writerow([int(idx), repr(float(w)), *(repr(float(v)) for v in row)])

    @classmethod
    def from_csv(cls, path, method=LEVERAGE, seed=None) -> "WeightedCoreset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise CSVParseError("empty coreset file")
        header, body = rows[0], rows[1:]
        if len(header) < 3 or header[0] != "index" or header[1] != "weight":
            raise CSVParseError("header must start with 'index,weight'", row=1)
        idx, wts, vals = [], [], []
        for r, row in enumerate(body, start=2):
            if len(row) != len(header):
                raise CSVParseError(f"expected {len(header)} fields, got {len(row)}", row=r)
            try:
                idx.append(int(row[0]))
            except ValueError:
                raise CSVParseError(f"bad index {row[0]!r}", row=r, col=1) from None
            try:
                wts.append(float(row[1]))
                vals.append([float(v) for v in row[2:]])
            except ValueError as exc:
                raise CSVParseError(str(exc), row=r) from None
        if not body:
            raise CSVParseError("coreset file has no data rows")
        return cls(
            data=as_data_matrix(vals),
            weights=np.asarray(wts, dtype=np.float64),
            source_indices=np.asarray(idx, dtype=np.int64),
            method=method,
            seed=seed,
            stats={"variable_names": header[2:]},
        )


def _basis(X, intercept):
    return thin_svd(with_intercept(X) if intercept else X)


def coreset_from_operator(X, S: SamplingOperator, method=LEVERAGE, stats=None) -> WeightedCoreset:
    return WeightedCoreset(
        data=X[S.indices].copy(),
        weights=S.weights.copy(),
        source_indices=S.indices.copy(),
        method=method,
        seed=S.seed,
        stats=dict(stats or {}),
    )


def build_leverage_coreset(
    X,
    eps: float = 0.2,
    seed: int | None = 0,
    const_D: float = 1.0,
    *,
    intercept: bool = True,
    boost_logd: bool = False,
    svd: ThinSVD | None = None,
) -> WeightedCoreset:
    """Leverage-score coreset with size parameter from ``recommended_size``.

    The basis spans the columns of X, plus the all-ones column when the
    downstream regressions carry an intercept. One coreset serves all d
    per-variable regressions. ``boost_logd`` multiplies k by ``max(1, ln d)``.
    """
    X = as_data_matrix(X)
    if svd is None:
        svd = _basis(X, intercept)
    scores = leverage_scores(svd)
    k = recommended_size(svd.rank, eps, const_D)
    if boost_logd:
        k = int(math.ceil(k * max(1.0, math.log(X.shape[1]))))
    q = sampling_probabilities(scores, k)
    S = draw_sampling_operator(q, seed)
    stats = {"rank": svd.rank, "size_param": k, "expected_size": float(q.sum()), "eps": eps}
    return coreset_from_operator(X, S, LEVERAGE, stats)


def build_leverage_coreset_of_size(
    X, m: int, seed: int | None = 0, *, intercept: bool = True, svd: ThinSVD | None = None
) -> WeightedCoreset:
    """Leverage-score coreset whose expected size equals ``m``."""
    X = as_data_matrix(X)
    n = X.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"target size must be in [1, {n}], got {m}")
    if svd is None:
        svd = _basis(X, intercept)
    scores = leverage_scores(svd)
    k = size_param_for_expected(scores, m)
    q = sampling_probabilities(scores, k)
    S = draw_sampling_operator(q, seed)
    stats = {"rank": svd.rank, "size_param": k, "expected_size": float(q.sum())}
    return coreset_from_operator(X, S, LEVERAGE, stats)


def build_uniform_coreset(X, m: int, seed: int | None = 0) -> WeightedCoreset:
    """``m`` distinct rows drawn uniformly without replacement, each weighted n/m."""
    X = as_data_matrix(X)
    n = X.shape[0]
    if not 1 <= m <= n:
        raise ValueError(f"uniform coreset size must be in [1, {n}], got {m}")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=m, replace=False))
    return WeightedCoreset(
        data=X[idx].copy(),
        weights=np.full(m, n / m),
        source_indices=idx,
        method=UNIFORM,
        seed=seed,
        stats={"expected_size": float(m)},
    )
