"""CSV ingestion, transforms, metrics and the cross-validated experiment driver."""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import depnet
from .coreset import build_leverage_coreset_of_size, build_uniform_coreset
from .errors import CoreDNError, CSVParseError, DataError, EmptyDrawError
from .glm import GAUSSIAN, POISSON, check_family
from .matrix_core import as_data_matrix, thin_svd, with_intercept
from .structure import adjacency, frobenius_difference

FULL = "full"
LEVERAGE = "leverage"
UNIFORM = "uniform"
METHODS = (FULL, LEVERAGE, UNIFORM)
_ALIASES = {"coreset": LEVERAGE, "cdn": LEVERAGE, "udn": UNIFORM}

REPORT_COLUMNS = (
    "method", "family", "fraction", "fold", "nlpl", "rmse",
    "relative_error", "frobenius_to_full", "train_seconds", "seed",
)
MAX_REDRAWS = 20


# --- I/O ---------------------------------------------------------------


def load_csv(path, header: bool = False, integer: bool = False, return_names: bool = False):
    """Parse a rectangular numeric CSV.

    With ``integer=True`` every cell must be a non-negative integer (count
    data). Errors carry 1-based row and column positions in the file.
    """
    names = None
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        width = None
        for r, raw in enumerate(reader, start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            if header and names is None:
                names = [c.strip() for c in raw]
                width = len(names)
                continue
            if width is None:
                width = len(raw)
            if len(raw) != width:
                raise CSVParseError(f"expected {width} fields, got {len(raw)}", row=r)
            vals = []
            for c, cell in enumerate(raw, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise CSVParseError(f"non-numeric cell {cell.strip()!r}", row=r, col=c) from None
                if not math.isfinite(v):
                    raise CSVParseError(f"non-finite cell {cell.strip()!r}", row=r, col=c)
                if integer:
                    if v != math.floor(v):
                        raise CSVParseError(f"non-integer count {cell.strip()!r}", row=r, col=c)
                    if v < 0:
                        raise CSVParseError(f"negative count {cell.strip()!r}", row=r, col=c)
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise CSVParseError("no data rows")
    X = as_data_matrix(rows)
    return (X, names) if return_names else X


def write_matrix_csv(X, path, names=None) -> None:
    X = np.asarray(X)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names if names else [f"x{j}" for j in range(X.shape[1])])
        for row in X:
            writer.writerow([repr(float(v)) for v in row])


# --- transforms and metrics ---------------------------------------------


def transform(X, kind: str) -> np.ndarray:
    """Elementwise ``log1p``, ``clip01`` or ``floor``."""
    X = np.asarray(X, dtype=np.float64)
    if kind == "log1p":
        if np.any(X < -1):
            raise DataError("log1p needs all values >= -1")
        return np.log1p(X)
    if kind == "clip01":
        return np.clip(X, 0.0, 1.0)
    if kind == "floor":
        return np.floor(X)
    if kind in ("none", "identity"):
        return X.copy()
    raise ValueError(f"unknown transform {kind!r}")


def relative_error(f_tilde: float, f_star: float) -> float:
    if f_star == 0:
        raise ValueError("relative error is undefined for f_star == 0")
    return abs(f_tilde - f_star) / abs(f_star)


def rmse(pred, target) -> float:
    diff = np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64)
    return float(np.sqrt(np.mean(diff * diff)))


def objective(dn, X, weights=None) -> float:
    """Training objective used for relative errors: GDN loss or Poisson NLPL."""
    if dn.family == GAUSSIAN:
        return depnet.gdn_loss(dn, X, weights)
    return depnet.neg_log_pseudo_likelihood(dn, X, weights)


def default_prediction_transform(family: str) -> str:
    return "floor" if family == POISSON else "none"


# --- experiment driver --------------------------------------------------


@dataclass
class EvalReport:
    method: str
    family: str
    fraction: float
    fold: int
    nlpl: float
    rmse: float
    relative_error: float
    frobenius_to_full: float
    train_seconds: float
    seed: int
    config: dict = field(default_factory=dict)

    @property
    def sample_fraction(self) -> float:
        return self.fraction

    def row(self) -> list:
        return [getattr(self, c) for c in REPORT_COLUMNS]


def normalize_method(method: str) -> str:
    m = _ALIASES.get(method, method)
    if m not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    return m


def job_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence([seed, *key]).generate_state(1)[0])


def compress(X, method, fraction, seed, *, intercept=True, svd=None):
    """Draw a coreset of expected size ``ceil(fraction * n)``; redraws on empty."""
    n = X.shape[0]
    m = min(n, max(1, math.ceil(fraction * n)))
    if method == UNIFORM:
        return build_uniform_coreset(X, m, seed)
    if svd is None:
        svd = thin_svd(with_intercept(X) if intercept else X)
    for attempt in range(MAX_REDRAWS):
        s = seed if attempt == 0 else job_seed(seed, attempt)
        try:
            return build_leverage_coreset_of_size(X, m, s, intercept=intercept, svd=svd)
        except EmptyDrawError:
            continue
    raise EmptyDrawError(f"{MAX_REDRAWS} consecutive empty draws")


def evaluate(dn, X_test, *, prediction_transform=None) -> dict:
    kind = prediction_transform or default_prediction_transform(dn.family)
    pred = transform(depnet.predict(dn, X_test), kind)
    return {
        "nlpl": depnet.neg_log_pseudo_likelihood(dn, X_test),
        "rmse": rmse(pred, X_test),
    }


def _tagged(exc, context):
    try:
        return type(exc)(f"{context}: {exc}")
    except TypeError:
        return CoreDNError(f"{context}: {exc}")


def fold_assignment(n: int, folds: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(seed).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, folds)]


def cross_validate(
    X,
    family: str = GAUSSIAN,
    methods=(FULL, LEVERAGE, UNIFORM),
    fractions=(0.1, 0.2, 0.3, 0.4),
    folds: int = 10,
    seed: int = 0,
    *,
    intercept: bool = True,
    prediction_transform: str | None = None,
    workers: int = 1,
) -> list[EvalReport]:
    """k-fold evaluation of full, leverage-coreset and uniform-sample networks.

    Every fold trains a full network on its training part; relative errors
    and structure distances are measured against it on that training part.
    NLPL and RMSE are measured on the held-out part.
    """
    check_family(family)
    X = as_data_matrix(X)
    n = X.shape[0]
    if folds < 2 or n < folds:
        raise ValueError(f"need 2 <= folds <= n, got folds={folds}, n={n}")
    methods = [normalize_method(m) for m in methods]
    pt = prediction_transform or default_prediction_transform(family)
    parts = fold_assignment(n, folds, seed)
    config = {
        "intercept": intercept,
        "prediction_transform": pt,
        "folds": folds,
        "objective": "gdn_loss" if family == GAUSSIAN else "nlpl",
    }

    reports = []
    for f, test_idx in enumerate(parts):
        train_mask = np.ones(n, dtype=bool)
        train_mask[test_idx] = False
        X_tr, X_te = X[train_mask], X[test_idx]

        t0 = time.perf_counter()
        try:
            full = depnet.train(X_tr, family, intercept=intercept)
        except CoreDNError as exc:
            raise _tagged(exc, f"fold {f}, method full") from exc
        full_seconds = time.perf_counter() - t0
        f_star = objective(full, X_tr)
        A_full = adjacency(full)
        svd_tr, svd_seconds = None, 0.0
        if LEVERAGE in methods:
            t0 = time.perf_counter()
            svd_tr = thin_svd(with_intercept(X_tr) if intercept else X_tr)
            svd_seconds = time.perf_counter() - t0

        def run(job):
            method, fraction, js = job
            try:
                t0 = time.perf_counter()
                if method == FULL:
                    dn, secs, size = full, full_seconds, X_tr.shape[0]
                else:
                    # The basis is shared across fractions; its cost is charged to each job.
                    cs = compress(X_tr, method, fraction, js, intercept=intercept, svd=svd_tr)
                    dn = depnet.train(cs, family, intercept=intercept)
                    secs, size = time.perf_counter() - t0, cs.size
                    if method == LEVERAGE:
                        secs += svd_seconds
                metrics = evaluate(dn, X_te, prediction_transform=pt)
                return EvalReport(
                    method=method,
                    family=family,
                    fraction=fraction,
                    fold=f,
                    nlpl=metrics["nlpl"],
                    rmse=metrics["rmse"],
                    relative_error=relative_error(objective(dn, X_tr), f_star),
                    frobenius_to_full=frobenius_difference(adjacency(dn), A_full),
                    train_seconds=secs,
                    seed=js,
                    config={**config, "coreset_size": int(size)},
                )
            except CoreDNError as exc:
                raise _tagged(exc, f"fold {f}, method {method}, fraction {fraction}") from exc

        jobs = []
        for mi, method in enumerate(methods):
            if method == FULL:
                jobs.append((FULL, 1.0, seed))
                continue
            for fi, fraction in enumerate(fractions):
                jobs.append((method, float(fraction), job_seed(seed, f, mi, fi)))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                reports.extend(pool.map(run, jobs))
        else:
            reports.extend(run(j) for j in jobs)
    return reports


def compare_to_full(
    X,
    family: str = GAUSSIAN,
    methods=(LEVERAGE, UNIFORM),
    fractions=(0.1, 0.2, 0.3, 0.4),
    seed: int = 0,
    *,
    intercept: bool = True,
    prediction_transform: str | None = None,
) -> list[EvalReport]:
    """In-sample comparison of compressed networks with the full-data network.

    Relative error, structure distance, NLPL and RMSE are all measured on X
    itself; reports carry ``fold = -1``.
    """
    check_family(family)
    X = as_data_matrix(X)
    methods = [normalize_method(m) for m in methods]
    pt = prediction_transform or default_prediction_transform(family)
    full = depnet.train(X, family, intercept=intercept)
    f_star = objective(full, X)
    A_full = adjacency(full)
    svd = thin_svd(with_intercept(X) if intercept else X) if LEVERAGE in methods else None
    reports = []
    for mi, method in enumerate(methods):
        for fi, fraction in enumerate([1.0] if method == FULL else fractions):
            js = job_seed(seed, mi, fi)
            t0 = time.perf_counter()
            if method == FULL:
                dn, size = full, X.shape[0]
            else:
                cs = compress(X, method, fraction, js, intercept=intercept, svd=svd)
                dn, size = depnet.train(cs, family, intercept=intercept), cs.size
            secs = time.perf_counter() - t0
            metrics = evaluate(dn, X, prediction_transform=pt)
            reports.append(EvalReport(
                method=method,
                family=family,
                fraction=float(fraction),
                fold=-1,
                nlpl=metrics["nlpl"],
                rmse=metrics["rmse"],
                relative_error=relative_error(objective(dn, X), f_star),
                frobenius_to_full=frobenius_difference(adjacency(dn), A_full),
                train_seconds=secs,
                seed=js,
                config={"intercept": intercept, "prediction_transform": pt,
                        "coreset_size": int(size)},
            ))
    return reports


def summarize(reports) -> list[dict]:
    """Mean of each metric over folds, per (method, fraction)."""
    groups: dict = {}
    for r in reports:
        groups.setdefault((r.method, r.fraction), []).append(r)
    out = []
    for (method, fraction), rs in groups.items():
        row = {"method": method, "fraction": fraction, "folds": len(rs)}
        for key in ("nlpl", "rmse", "relative_error", "frobenius_to_full", "train_seconds"):
            row[key] = float(np.mean([getattr(r, key) for r in rs]))
        out.append(row)
    return out


def write_reports_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_COLUMNS)
        for r in reports:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in r.row()])


def write_reports_json(reports, path, config=None) -> None:
    payload = {
        "config": config or {},
        "reports": [asdict(r) for r in reports],
        "summary": summarize(reports),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
