"""Command-line front end.

Usage:
    coredn coreset   --input data.csv --eps 0.2 --out coreset.csv
    coredn train     --input data.csv --family gaussian --out model.json
    coredn eval      --model model.json --input test.csv --out report.csv
    coredn cv        --input data.csv --family poisson --fraction 0.1 --fraction 0.2 --out cv.csv
    coredn gibbs     --model model.json --sweeps 1000 --out samples.csv
    coredn structure --model model.json --edges 70 --out edges.csv
    coredn hard      --n 16 --out instance.csv --report separation.json
    coredn generate  --kind gaussian --n 1000 --d 8 --out data.csv

Exit codes: 0 success, 1 invalid data or configuration, 2 usage error,
3 I/O failure. Outputs are written to temporary files and moved into place
only when the whole command succeeds.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import datagen, depnet, harness, structure
from .coreset import WeightedCoreset, build_leverage_coreset, build_uniform_coreset
from .errors import CoreDNError
from .glm import FAMILIES, GAUSSIAN, POISSON
from .leverage import SamplingOperator, embedding_distortion
from .matrix_core import thin_svd, with_intercept

DEFAULT_SEED = 0
EXIT_OK, EXIT_DATA, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
# Distortion is reported only when the basis is small enough to check cheaply.
MAX_DISTORTION_RANK = 200


class Outputs:
    """Collects output files and publishes them atomically on success."""

    def __init__(self):
        self._pending = []

    def path(self, final_path):
        final_path = os.fspath(final_path)
        directory = os.path.dirname(os.path.abspath(final_path))
        fd, tmp = tempfile.mkstemp(prefix=".coredn-", dir=directory)
        os.close(fd)
        self._pending.append((tmp, final_path))
        return tmp

    def commit(self):
        umask = os.umask(0)
        os.umask(umask)
        for tmp, final in self._pending:
            os.chmod(tmp, 0o666 & ~umask)
            os.replace(tmp, final)
        self._pending.clear()

    def discard(self):
        for tmp, _ in self._pending:
            if os.path.exists(tmp):
                os.remove(tmp)
        self._pending.clear()


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _write_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o)!r}")


def _print_json(obj):
    print(json.dumps(obj, indent=2, default=_json_default))


def _load_input(args):
    X, names = harness.load_csv(
        args.input, header=args.header, integer=(args.family == POISSON and not args.transform),
        return_names=True,
    )
    for kind in args.transform or ():
        X = harness.transform(X, kind)
    return X, names


# --- subcommands --------------------------------------------------------


def cmd_coreset(args, out: Outputs):
    X, names = _load_input(args)
    method = harness.normalize_method(args.method)
    if method == harness.FULL:
        raise ValueError("coreset needs --method leverage or uniform")
    if method == harness.UNIFORM:
        if args.fraction is None:
            raise ValueError("uniform sampling needs --fraction")
        m = min(X.shape[0], max(1, math.ceil(args.fraction * X.shape[0])))
        cs = build_uniform_coreset(X, m, args.seed)
    elif args.fraction is not None:
        cs = harness.compress(X, method, args.fraction, args.seed, intercept=args.intercept)
    else:
        cs = build_leverage_coreset(
            X, args.eps, args.seed, args.const_d,
            intercept=args.intercept, boost_logd=args.boost_logd,
        )
    stats = {
        "method": cs.method,
        "size": cs.size,
        "n": int(X.shape[0]),
        "expected_size": cs.stats.get("expected_size"),
        "seed": cs.seed,
    }
    if method == harness.LEVERAGE:
        basis = with_intercept(X) if args.intercept else X
        svd = thin_svd(basis)
        stats["rank"] = svd.rank
        stats["size_param"] = cs.stats.get("size_param")
        if svd.rank <= MAX_DISTORTION_RANK:
            op = SamplingOperator(cs.source_indices, cs.weights, X.shape[0], cs.seed)
            stats["distortion"] = embedding_distortion(basis, op, svd)
    cs.to_csv(out.path(args.out), names)
    report = {"config": _echo(args), "stats": stats}
    if args.stats_out:
        _write_json(report, out.path(args.stats_out))
    _print_json(report)


def cmd_train(args, out: Outputs):
    if args.coreset:
        data = WeightedCoreset.from_csv(args.coreset)
        names = data.stats.get("variable_names")
        for kind in args.transform or ():
            data = WeightedCoreset(
                harness.transform(data.data, kind), data.weights,
                data.source_indices, data.method, data.seed,
            )
    else:
        data, names = _load_input(args)
    dn = depnet.train(data, args.family, intercept=args.intercept,
                      variable_names=names, workers=args.workers)
    dn.save(out.path(args.out))
    _print_json({"config": _echo(args), "d": dn.d, "converged": list(dn.converged)})


def cmd_eval(args, out: Outputs):
    dn = depnet.DependencyNetwork.load(args.model)
    args.family = dn.family
    X, _ = _load_input(args)
    metrics = harness.evaluate(dn, X, prediction_transform=args.prediction_transform)
    row = {
        "method": args.method,
        "family": dn.family,
        "fraction": args.fraction if args.fraction is not None else 1.0,
        "fold": -1,
        "nlpl": metrics["nlpl"],
        "rmse": metrics["rmse"],
        "relative_error": 0.0,
        "frobenius_to_full": 0.0,
        "train_seconds": 0.0,
        "seed": args.seed,
    }
    if dn.family == GAUSSIAN:
        row["gdn_loss"] = depnet.gdn_loss(dn, X)
    if args.reference:
        ref = depnet.DependencyNetwork.load(args.reference)
        row["relative_error"] = harness.relative_error(
            harness.objective(dn, X), harness.objective(ref, X)
        )
        row["frobenius_to_full"] = structure.frobenius_difference(
            structure.adjacency(dn), structure.adjacency(ref)
        )
    report = harness.EvalReport(**{k: row[k] for k in harness.REPORT_COLUMNS},
                                config=_echo(args))
    harness.write_reports_csv([report], out.path(args.out))
    payload = {"config": _echo(args), "metrics": row}
    if args.json_out:
        _write_json(payload, out.path(args.json_out))
    _print_json(payload)


def cmd_cv(args, out: Outputs):
    X, _ = _load_input(args)
    methods = args.methods or [harness.FULL, harness.LEVERAGE, harness.UNIFORM]
    fractions = args.fractions or [0.1, 0.2, 0.3, 0.4]
    reports = harness.cross_validate(
        X, args.family, methods, fractions, args.folds, args.seed,
        intercept=args.intercept, prediction_transform=args.prediction_transform,
        workers=args.workers,
    )
    harness.write_reports_csv(reports, out.path(args.out))
    if args.json_out:
        harness.write_reports_json(reports, out.path(args.json_out), _echo(args))
    _print_json({"config": _echo(args), "summary": harness.summarize(reports)})


def cmd_gibbs(args, out: Outputs):
    dn = depnet.DependencyNetwork.load(args.model)
    init = None
    if args.init:
        init = np.asarray([float(v) for v in args.init.split(",")])
    samples = depnet.gibbs_chain(dn, args.sweeps, seed=args.seed, init=init, burn_in=args.burn_in)
    harness.write_matrix_csv(samples, out.path(args.out), list(dn.variable_names or []) or None)
    _print_json({"config": _echo(args), "mean": samples.mean(axis=0)})


def cmd_structure(args, out: Outputs):
    dn = depnet.DependencyNetwork.load(args.model)
    edges = structure.top_positive_edges(structure.adjacency(dn), args.edges)
    names = list(dn.variable_names) if dn.variable_names else None
    structure.write_edges_csv(edges, out.path(args.out), names)
    if args.dot:
        with open(out.path(args.dot), "w") as fh:
            fh.write(structure.edges_to_dot(edges, names, dn.d))
    _print_json({"config": _echo(args), "edges": len(edges)})


def cmd_hard(args, out: Outputs):
    bits = None
    if args.bits:
        bits = [int(c) for c in args.bits.strip()]
    inst = datagen.generate_hard_instance(args.n, bits, args.seed)
    rows = np.column_stack([inst.present, inst.X, inst.y])
    with open(out.path(args.out), "w") as fh:
        fh.write("index,x1,x2,x3,y\n")
        for r in rows:
            fh.write(f"{int(r[0])},{r[1]!r},{r[2]!r},{r[3]!r},{int(r[4])}\n")
    report = datagen.separation_report(inst)
    report["bits"] = "".join(str(int(b)) for b in inst.bits)
    report["config"] = _echo(args)
    if args.report:
        _write_json(report, out.path(args.report))
    summary = {k: v for k, v in report.items() if k != "queries"}
    _print_json(summary)


def cmd_generate(args, out: Outputs):
    if args.kind == "gaussian":
        X = datagen.generate_gaussian_dn_data(args.d, args.n, noise=args.noise, seed=args.seed)
    elif args.kind == "heavy":
        X = datagen.generate_gaussian_dn_data(args.d, args.n, noise=args.noise, seed=args.seed)
        X = datagen.inject_high_leverage_rows(X, args.outliers, args.scale, seed=args.seed + 1)
    elif args.kind == "poisson":
        X, _ = datagen.generate_poisson_dn_data(args.d, args.n, sigma=args.sigma, seed=args.seed)
    else:
        X = datagen.generate_stacked_identity(args.d, args.m)
    harness.write_matrix_csv(X, out.path(args.out))
    _print_json({"config": _echo(args), "shape": list(X.shape)})


# --- parser --------------------------------------------------------------


def _add_common(p, *, data=True, family=True):
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    if data:
        p.add_argument("--input", required=True)
        p.add_argument("--header", action="store_true", help="first CSV row holds variable names")
        p.add_argument("--transform", action="append", choices=["log1p", "clip01", "floor"],
                       help="input transform, applied in the given order (repeatable)")
    if family:
        p.add_argument("--family", choices=FAMILIES, default=GAUSSIAN)
        p.add_argument("--intercept", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--workers", type=int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coredn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coreset", help="draw a weighted coreset")
    _add_common(p)
    p.add_argument("--method", default="leverage", choices=["leverage", "uniform"])
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--fraction", type=float, help="target expected size as a fraction of n")
    p.add_argument("--const-d", type=float, default=1.0)
    p.add_argument("--boost-logd", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--stats-out")
    p.set_defaults(func=cmd_coreset)

    p = sub.add_parser("train", help="train a dependency network")
    _add_common(p, data=False)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input")
    src.add_argument("--coreset", help="weighted coreset CSV (index, weight, variables)")
    p.add_argument("--header", action="store_true")
    p.add_argument("--transform", action="append", choices=["log1p", "clip01", "floor"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a trained network on data")
    _add_common(p, family=False)
    p.add_argument("--model", required=True)
    p.add_argument("--reference", help="full-data model for relative error and structure distance")
    p.add_argument("--method", default="full", choices=["full", "leverage", "uniform"])
    p.add_argument("--fraction", type=float)
    p.add_argument("--prediction-transform", choices=["none", "clip01", "floor"])
    p.add_argument("--out", required=True)
    p.add_argument("--json-out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("cv", help="cross-validated comparison of full, coreset and uniform DNs")
    _add_common(p)
    p.add_argument("--method", dest="methods", action="append",
                   choices=["full", "leverage", "uniform"])
    p.add_argument("--fraction", dest="fractions", action="append", type=float)
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--prediction-transform", choices=["none", "clip01", "floor"])
    p.add_argument("--out", required=True)
    p.add_argument("--json-out")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("gibbs", help="pseudo-Gibbs sampling from a trained network")
    _add_common(p, data=False, family=False)
    p.add_argument("--model", required=True)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--burn-in", type=int, default=0)
    p.add_argument("--init", help="comma-separated starting state (default zeros)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gibbs)

    p = sub.add_parser("structure", help="export the top positive edges")
    _add_common(p, data=False, family=False)
    p.add_argument("--model", required=True)
    p.add_argument("--edges", type=int, default=70)
    p.add_argument("--out", required=True)
    p.add_argument("--dot", help="also write a Graphviz description")
    p.set_defaults(func=cmd_structure)

    p = sub.add_parser("hard", help="unit-roots Poisson hard instance and separation report")
    _add_common(p, data=False, family=False)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--bits", help="0/1 string of length n (default: random from --seed)")
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_hard)

    p = sub.add_parser("generate", help="write a synthetic data set")
    _add_common(p, data=False, family=False)
    p.add_argument("--kind", choices=["gaussian", "heavy", "poisson", "stacked"], default="gaussian")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--d", type=int, default=8)
    p.add_argument("--m", type=int, default=2, help="stacking exponent for --kind stacked")
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=0.0, help="log-normal dispersion for poisson")
    p.add_argument("--outliers", type=int, default=10)
    p.add_argument("--scale", type=float, default=20.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    out = Outputs()
    try:
        args.func(args, out)
        out.commit()
    except (CoreDNError, ValueError) as exc:
        out.discard()
        print(f"coredn {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        out.discard()
        print(f"coredn {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BaseException:
        out.discard()
        raise
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
