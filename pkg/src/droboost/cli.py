"""Command line interface: train, predict, evaluate, calibrate-delta, benchmark.

Exit codes: 0 success, 2 bad arguments, 3 data errors, 4 solver failures.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .adaboost import train_adaboost
from .boost import ADABOOST_SCHEDULE, EXACT_ROBUST, FIXED_WEIGHTS, TrainConfig, train
from .calibrate import CalibrationSpec, EplUndefinedError, basis_moments, chi2_quantile, epl_solve, select_delta
from .core import DataError, DimensionError, SolverError, loss_spec
from .data import Schema, SplitSpec, derived_seeds, load_csv, split
from .learners import TreeConfig
from .metrics import METRIC_LABELS, METRIC_NAMES, classification_metrics, format_kv, format_table
from .modelfile import load_model, save_model, write_trace

log = logging.getLogger("droboost")

THREADS_ENV = "DROBOOST_THREADS"
EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 2, 3, 4


def _delta_arg(text: str):
    if text in ("auto", ADABOOST_SCHEDULE):
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number >= 0, 'auto' or 'adaboost', got {text!r}") from None
    if not value >= 0.0:
        raise argparse.ArgumentTypeError("delta must be >= 0")
    return value


def _add_data_args(p, required=True):
    p.add_argument("--data", required=required, help="CSV file")
    p.add_argument("--schema", choices=("uci_credit", "generic"), default="generic")
    p.add_argument("--label-column", help="label column name (generic schema)")
    p.add_argument("--positive-value", default="1", help="label value mapped to +1 (generic schema)")
    p.add_argument("--skip-rows", type=int, default=1, help="header lines; the last one names the columns")


def _add_model_args(p):
    p.add_argument("--loss", choices=("exp", "logistic"), default="exp")
    p.add_argument("--delta", type=_delta_arg, default="auto",
                   help="KL radius, 'auto' (chi-square calibration) or 'adaboost'")
    p.add_argument("--confidence", type=float, default=0.9)
    p.add_argument("--dim-T", type=int, default=30, help="dimension used by --delta auto")
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--min-leaf", type=int, default=1)
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--line-search", choices=(EXACT_ROBUST, FIXED_WEIGHTS), default=EXACT_ROBUST)
    p.add_argument("--stall-tol", type=float, default=1e-9)
    p.add_argument("--seed", type=int, default=0)


def _schema(args) -> Schema:
    if args.schema == "generic" and not args.label_column:
        raise argparse.ArgumentTypeError("--label-column is required with --schema generic")
    return Schema(kind=args.schema, label_column=args.label_column, positive_value=args.positive_value,
                  skip_rows=args.skip_rows)


def _train_config(args) -> TrainConfig:
    if args.delta == "auto":
        delta = CalibrationSpec(confidence=args.confidence, T=args.dim_T)
    else:
        delta = args.delta
    return TrainConfig(
        delta=delta,
        loss=loss_spec(args.loss).kind,
        tree=TreeConfig(max_depth=args.depth, min_leaf=args.min_leaf),
        max_iters=args.iters,
        line_search=args.line_search,
        stall_tolerance=args.stall_tol,
        seed=args.seed,
    )


def cmd_train(args) -> int:
    config = _train_config(args)
    data = load_csv(args.data, _schema(args))
    delta = config.resolve_delta(data.N)
    ensemble, trace = train(data, config)
    save_model(args.out, ensemble, data.d, loss=config.loss, delta=delta)
    trace_path = args.trace or f"{args.out}.trace.tsv"
    header = {"delta": repr(delta) if isinstance(delta, float) else delta, "loss": config.loss,
              "depth": config.tree.max_depth, "iters": config.max_iters, "line_search": config.line_search,
              "seed": config.seed, "N": data.N, "stop": trace.stop_reason}
    if args.delta == "auto":
        header["confidence"] = args.confidence
        header["dim_T"] = args.dim_T
    write_trace(trace_path, trace, header)
    last = trace.records[-1]
    print(f"terms={len(ensemble)} delta={header['delta']} robust_loss={last.robust_loss!r} "
          f"empirical_loss={last.empirical_loss!r} stop={trace.stop_reason}")
    return 0


def _load_for_model(args):
    ensemble, meta = load_model(args.model)
    data = load_csv(args.data, _schema(args))
    if data.d != meta["n_features"]:
        raise DimensionError(f"model expects {meta['n_features']} features, data has {data.d}")
    return ensemble, meta, data


def cmd_predict(args) -> int:
    ensemble, _, data = _load_for_model(args)
    scores = ensemble.evaluate(data.features)
    out = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        out.write("score\tlabel\n")
        for s in scores.tolist():
            out.write(f"{s!r}\t{1 if s >= 0.0 else -1}\n")
    finally:
        if args.out:
            out.close()
    return 0


def cmd_evaluate(args) -> int:
    ensemble, _, data = _load_for_model(args)
    metrics = classification_metrics(ensemble.evaluate(data.features), data.labels)
    if args.format in ("kv", "both"):
        print(format_kv(metrics))
    if args.format in ("table", "both"):
        if args.format == "both":
            print()
        print(format_table(metrics))
    return 0


def cmd_calibrate(args) -> int:
    n = args.n
    data = None
    if args.data:
        data = load_csv(args.data, _schema(args))
        n = n or data.N
    if not n:
        raise argparse.ArgumentTypeError("give --n or --data")
    q = chi2_quantile(args.dim_T, args.confidence)
    delta = select_delta(CalibrationSpec(args.confidence, args.dim_T, n))
    print(f"chi2_quantile={q!r}\nN={n}\ndelta={delta!r}")
    if args.model:
        if data is None:
            raise argparse.ArgumentTypeError("--model needs --data")
        ensemble, meta = load_model(args.model)
        M = basis_moments(ensemble, data, loss_spec(meta["loss"]))
        res = epl_solve(M)
        print(f"basis_dim={M.shape[1]}\nepl={res.value!r}\ntwo_n_epl={2 * data.N * res.value!r}")
    return 0


def _benchmark_rep(data, split_seed, args, config, baseline_config):
    tr, te = split(data, SplitSpec(train_size=args.train_size, seed=split_seed))
    dro, _ = train(tr, config)
    if baseline_config is None:
        base, _ = train_adaboost(tr, config.tree, args.iters)
    else:
        base, _ = train(tr, baseline_config)
    row = {}
    for name, model in (("baseline", base), ("dro", dro)):
        for part, ds in (("train", tr), ("test", te)):
            row[(name, part)] = classification_metrics(model.evaluate(ds.features), ds.labels)
    return row


def cmd_benchmark(args) -> int:
    config = _train_config(args)
    data = load_csv(args.data, _schema(args))
    baseline_config = None
    if args.baseline == "erm":
        baseline_config = TrainConfig(delta=0.0, loss=config.loss, tree=config.tree, max_iters=config.max_iters,
                                      line_search=config.line_search, stall_tolerance=config.stall_tolerance)
    seeds = derived_seeds(args.seed, args.reps)
    threads = args.threads or int(os.environ.get(THREADS_ENV, "1") or 1)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(lambda s: _benchmark_rep(data, s, args, config, baseline_config), seeds))

    base_name = "AdaBoost" if baseline_config is None else "ERM-Boost"
    cols = [("baseline", "train"), ("dro", "train"), ("baseline", "test"), ("dro", "test")]
    titles = {"baseline": base_name, "dro": "DRO-Boosting"}
    summary = {}
    for col in cols:
        for m in METRIC_NAMES:
            vals = np.array([r[col][m] for r in rows], dtype=np.float64)
            sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
            summary[(col, m)] = (float(np.mean(vals)), sd)

    delta = config.resolve_delta(args.train_size)
    print(f"# reps={args.reps} train_size={args.train_size} depth={config.tree.max_depth} "
          f"iters={config.max_iters} delta={delta!r}")
    width = max(len(v) for v in METRIC_LABELS.values())
    head = "".join(f"{titles[n] + ' (' + p + ')':>24}" for n, p in cols)
    print(f"{'':<{width}}{head}")
    for m in METRIC_NAMES:
        cells = "".join(f"{summary[(c, m)][0]:>15.3f} +- {summary[(c, m)][1]:.3f}" for c in cols)
        print(f"{METRIC_LABELS[m]:<{width}}{cells}")
    if args.per_rep:
        for i, r in enumerate(rows):
            for c in cols:
                vals = " ".join(f"{m}={r[c][m]!r}" for m in METRIC_NAMES)
                print(f"rep={i} algo={c[0]} part={c[1]} {vals}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="droboost", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a robust boosting model")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--out", required=True, help="model file to write")
    p.add_argument("--trace", help="trace file (default: <out>.trace.tsv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="score a CSV with a trained model")
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="accuracy, class rates and exponential loss")
    _add_data_args(p)
    p.add_argument("--model", required=True)
    p.add_argument("--format", choices=("both", "kv", "table"), default="both")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate-delta", help="KL radius from the chi-square quantile")
    _add_data_args(p, required=False)
    p.add_argument("--confidence", type=float, default=0.9)
    p.add_argument("--dim-T", type=int, default=30)
    p.add_argument("--n", type=int, help="training size (defaults to the rows of --data)")
    p.add_argument("--model", help="also report the EPL of this model's basis on --data")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("benchmark", help="repeated split comparison against a baseline")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--train-size", type=int, default=3000)
    p.add_argument("--baseline", choices=("adaboost", "erm"), default="adaboost")
    p.add_argument("--threads", type=int, default=0, help=f"worker threads (default ${THREADS_ENV} or 1)")
    p.add_argument("--per-rep", action="store_true", help="also print one line per repetition")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as exc:
        parser.print_usage(sys.stderr)
        print(f"droboost: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DimensionError, OSError) as exc:
        print(f"droboost: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SolverError, EplUndefinedError) as exc:
        print(f"droboost: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"droboost: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
