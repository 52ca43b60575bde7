"""Command-line interface: ``gaqq fit|predict|simulate|benchmark|version``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
All behaviour is controlled by flags; nothing is read from the environment.
"""
import argparse
import json
import logging
import os
import sys

import numpy as np

from . import __version__
from .estimator import GRID_MULTIPLIERS, Hyperparams, bic, fit, tune
from .exceptions import (
    BenchmarkFailed, InvalidInput, NotPositiveDefinite, NotPositiveSemiDefinite, ParseError,
    SchemaError, TuningFailed,
)
from .fileio import (
    DataSchema, data_fingerprint, load_csv, load_features, load_model, parse_cell,
    resolve_column, save_model, write_benchmark, write_dataset, write_predictions,
)
from .predictor import predict_batch
from .simulation import (
    METHODS, BenchmarkConfig, ScenarioSpec, misclassification_error, replication_rng,
    rmspe, run_benchmark, scenario_preset, simulate,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
NUMERIC_ERRORS = (NotPositiveDefinite, NotPositiveSemiDefinite, TuningFailed, BenchmarkFailed)
DATA_ERRORS = (InvalidInput, ParseError, SchemaError, OSError)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _column(text):
    return int(text) if text.lstrip("-").isdigit() else text


def build_parser():
    ap = _Parser(prog="gaqq", description="Joint prediction of a quantitative and a "
                 "qualitative response with penalised Gaussian models.")
    ap.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    f = sub.add_parser("fit", help="fit a model to a CSV table")
    f.add_argument("--data", required=True)
    f.add_argument("--label-col", type=_column, default=0)
    f.add_argument("--response-col", type=_column, default=-1)
    f.add_argument("--feature-cols", default=None,
                   help="comma-separated names or indices (default: all remaining)")
    f.add_argument("--no-header", action="store_true")
    f.add_argument("--lambda1", type=float, default=None)
    f.add_argument("--lambda2", type=float, default=None)
    f.add_argument("--tune", action="store_true", help="choose the penalties by BIC")
    f.add_argument("--grid1", type=_floats, default=None, help="lambda1 values for --tune")
    f.add_argument("--grid2", type=_floats, default=None, help="lambda2 values for --tune")
    f.add_argument("--tol", type=float, default=1e-6, help="outer and glasso tolerance")
    f.add_argument("--max-iter", type=int, default=100, help="outer iteration cap")
    f.add_argument("--out-model", required=True)

    p = sub.add_parser("predict", help="predict labels and responses for a CSV table")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-header", action="store_true")
    p.add_argument("--truth-label-col", type=_column, default=None)
    p.add_argument("--truth-response-col", type=_column, default=None)

    s = sub.add_parser("simulate", help="draw one synthetic training/test replication")
    s.add_argument("--scenario", default=None, help="table preset such as t1-m1-s2-p40")
    s.add_argument("--precision-model", default="M1", choices=["M1", "M2", "M3", "M4", "M5"])
    s.add_argument("--p", type=int, default=40)
    s.add_argument("--classes", type=int, default=2)
    s.add_argument("--sizes", type=_ints, default=None, help="per-class sizes (default 30 each)")
    s.add_argument("--sparsity", choices=["S1", "S2"], default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--rep", type=int, default=0, help="replication index")
    s.add_argument("--out-dir", required=True)

    b = sub.add_parser("benchmark", help="replicated GAQQ vs GLDA comparison")
    b.add_argument("--scenario", required=True, help="table preset such as t1-m1-s2-p40")
    b.add_argument("--reps", type=int, default=100)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--methods", default=",".join(METHODS))
    b.add_argument("--grid", type=_floats, default=None,
                   help="multipliers of sqrt(log p / n) * n for both penalties")
    b.add_argument("--out", required=True, help="output directory")

    sub.add_parser("version", help="print the package version")
    return ap


def _cmd_fit(args):
    cols = None
    if args.feature_cols:
        cols = tuple(_column(c.strip()) for c in args.feature_cols.split(","))
    schema = DataSchema(args.label_col, args.response_col, cols, not args.no_header)
    data = load_csv(args.data, schema)
    hp = Hyperparams(tau1=args.tol, tau2=args.tol, glasso_tol=args.tol, max_outer=args.max_iter)
    if args.tune:
        res = tune(data, args.grid1, args.grid2, hp, threads=args.threads)
        model, trace = res.model, res.trace
    else:
        if args.lambda1 is None or args.lambda2 is None:
            raise UsageError("fit needs --lambda1 and --lambda2, or --tune")
        hp = Hyperparams(args.lambda1, args.lambda2, tau1=args.tol, tau2=args.tol,
                         glasso_tol=args.tol, max_outer=args.max_iter)
        model, trace = fit(data, hp)
        model.meta["bic"] = bic(model, data)
    model.meta.update(iterations=trace.iterations, converged=trace.converged,
                      data_fingerprint=data_fingerprint(data),
                      label_mapping=data.label_mapping, column_names=data.column_names)
    save_model(model, args.out_model)
    print(f"fitted K={model.k_classes} p={model.p} lambda1={model.lambda1:.6g} "
          f"lambda2={model.lambda2:.6g} bic={model.meta['bic']:.6g} "
          f"converged={trace.converged}")


def _cmd_predict(args):
    model = load_model(args.model)
    exclude = [c for c in (args.truth_label_col, args.truth_response_col) if c is not None]
    x, header, body = load_features(args.data, model, not args.no_header, exclude)
    preds = predict_batch(model, x)
    mapping = model.meta.get("label_mapping") or {}
    inverse = {v: k for k, v in mapping.items()}
    write_predictions(args.out, preds, inverse)
    first = 1 if args.no_header else 2
    if args.truth_label_col is not None:
        idx = resolve_column(args.truth_label_col, header, len(body[0]), "truth label")
        raw = [r[idx].strip() for r in body]
        if mapping:
            unknown = sorted(set(raw) - set(mapping))
            if unknown:
                raise InvalidInput(f"truth labels {unknown} were not seen in training")
            z = np.array([mapping[v] for v in raw])
        else:
            z = np.array([int(float(v)) for v in raw])
        print(f"me={misclassification_error(z, preds.z_hat):.17g}")
    if args.truth_response_col is not None:
        idx = resolve_column(args.truth_response_col, header, len(body[0]), "truth response")
        name = header[idx] if header else str(idx)
        y = np.array([parse_cell(r[idx], first + i, name) for i, r in enumerate(body)])
        print(f"rmspe={rmspe(y, preds.y_hat):.17g}")


def _cmd_simulate(args):
    if args.scenario:
        spec = scenario_preset(args.scenario, args.seed)
    else:
        sizes = tuple(args.sizes) if args.sizes else (30,) * args.classes
        if len(sizes) != args.classes:
            raise UsageError("--sizes needs one entry per class")
        spec = ScenarioSpec(args.precision_model, args.p, sizes, args.sparsity, seed=args.seed)
    train, (tw, tz), truth = simulate(spec, replication_rng(spec.seed, args.rep, spec.scenario_id))
    os.makedirs(args.out_dir, exist_ok=True)
    write_dataset(os.path.join(args.out_dir, "train.csv"), train.w, train.z)
    write_dataset(os.path.join(args.out_dir, "test.csv"), tw, tz)
    with open(os.path.join(args.out_dir, "truth.json"), "w", encoding="utf-8") as fh:
        json.dump({"scenario_id": spec.scenario_id, "seed": spec.seed, "rep": args.rep,
                   "precision": truth["precision"].tolist(), "means": truth["means"].tolist()},
                  fh, indent=1)
        fh.write("\n")
    print(f"wrote {spec.scenario_id} replication {args.rep} to {args.out_dir}")


def _cmd_benchmark(args):
    spec = scenario_preset(args.scenario, args.seed)
    methods = tuple(m.strip().upper() for m in args.methods.split(",") if m.strip())
    bad = [m for m in methods if m not in METHODS]
    if bad or not methods:
        raise UsageError(f"unknown methods {bad}; choose from {', '.join(METHODS)}")
    grid = tuple(args.grid) if args.grid else GRID_MULTIPLIERS
    config = BenchmarkConfig(grid, grid)
    results = run_benchmark(spec, methods, args.reps, config, threads=args.threads)
    os.makedirs(args.out, exist_ok=True)
    write_benchmark(results, os.path.join(args.out, "reps.csv"),
                    os.path.join(args.out, "summary.csv"))
    for r in results:
        print(f"{r.method}: ME {r.me_mean:.2f}% ({r.me_se:.2f})  "
              f"RMSPE {r.rmspe_mean:.3f} ({r.rmspe_se:.3f})  failed {r.failed}")


COMMANDS = {"fit": _cmd_fit, "predict": _cmd_predict, "simulate": _cmd_simulate,
            "benchmark": _cmd_benchmark}


def cmd_dispatch(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError(parser.format_usage() + "gaqq: error: a command is required")
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "version":
        print(f"gaqq {__version__}")
        return EXIT_OK
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"gaqq: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NUMERIC_ERRORS as exc:
        print(f"gaqq: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except DATA_ERRORS as exc:
        print(f"gaqq: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def main():
    sys.exit(cmd_dispatch())
