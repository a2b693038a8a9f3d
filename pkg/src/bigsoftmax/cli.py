"""Command-line entry point.

Exit codes: 0 success, 2 all learning rates failed during tuning,
3 I/O failure, 4 bad configuration or malformed input (including
argument errors).
"""

import argparse
import json
import sys

from .data import (DEFAULT_MAX_EXAMPLES, DEFAULT_MAX_FEATURES, load_dataset,
                   summary_json)
from .errors import BigSoftmaxError, TuningError
from .harness import (DEFAULT_GRID, bench, compare_formulations, evaluate,
                      train, tune)
from .objective import FORMULATIONS
from .optimizers import METHODS, OptimizerConfig

DEFAULT_BENCH_METHODS = ("vanilla", "umax", "isgd", "ove", "nce", "is")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad args; that code is taken by tuning
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(4, f"{self.prog}: error: {message}\n")


def _add_data_flags(p):
    p.add_argument("--data", required=True, help="libsvm-style input file")
    p.add_argument("--index-base", type=int, choices=(0, 1), default=1,
                   help="feature id base in the file (default 1)")
    p.add_argument("--max-features", type=int, default=DEFAULT_MAX_FEATURES)
    p.add_argument("--max-examples", type=int, default=DEFAULT_MAX_EXAMPLES)


def _add_run_flags(p):
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--decay", type=float, default=0.9)
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--m", type=int, default=None,
                   help="classes sampled per iteration "
                        "(default 5; implicit single-class uses 1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eval-points", type=int, default=10)
    p.add_argument("--formulation", choices=FORMULATIONS, default="ours")


def _grid_flag(p):
    p.add_argument("--grid", type=str, default=None,
                   help="comma-separated eta0 values "
                        "(default 1e-3..1e3, decades)")


def _parse_grid(args):
    if args.grid is None:
        return DEFAULT_GRID
    try:
        grid = tuple(float(t) for t in args.grid.split(",") if t.strip())
    except ValueError:
        raise BigSoftmaxError(f"bad grid {args.grid!r}")
    if not grid:
        raise BigSoftmaxError("empty grid")
    return grid


def _load(args):
    return load_dataset(args.data, index_base=args.index_base,
                        max_features=args.max_features,
                        max_examples=args.max_examples)


def _config(args, method, eta0=1.0):
    m = args.m if args.m is not None else (1 if method == "isgd" else 5)
    return OptimizerConfig(method=method, eta0=eta0, decay=args.decay,
                           mu=args.mu, delta=args.delta, m=m,
                           epochs=args.epochs, seed=args.seed,
                           eval_points=args.eval_points)


def cmd_ingest(args):
    print(summary_json(_load(args)))
    return 0


def cmd_tune(args):
    ds = _load(args)
    result = tune(ds, args.method, grid=_parse_grid(args),
                  config=_config(args, args.method),
                  formulation=args.formulation)
    print(json.dumps({
        "method": result.method,
        "chosen_eta0": result.chosen_eta0,
        "finals": {repr(k): v for k, v in sorted(result.finals.items())},
        "failures": {repr(k): v for k, v in sorted(result.failures.items())},
    }, indent=2, sort_keys=True))
    return 0


def cmd_train(args):
    ds = _load(args)
    cfg = _config(args, args.method, eta0=args.eta0)

    def report(rec):
        line = (f"epoch {rec.epoch}: log_loss={rec.log_loss!r} "
                f"error_rate={rec.error_rate!r}")
        print(line)

    result = train(ds, cfg, out_model=args.out,
                   formulation=args.formulation, eval_hook=report)
    if result.failed:
        print("run failed (overflow); saved state is the pre-failure one"
              if args.out else "run failed (overflow)")
    elif args.out:
        print(f"model written to {args.out}")
    return 0


def cmd_bench(args):
    ds = _load(args)
    methods = tuple(t for t in args.method.split(",") if t) \
        if args.method else DEFAULT_BENCH_METHODS
    for m in methods:
        if m not in METHODS:
            raise BigSoftmaxError(f"unknown method {m!r}")
    eta0s = {m: args.eta0 for m in methods} if args.eta0 else None
    records, tuned = bench(ds, methods, _config(args, methods[0]),
                           args.out, eta0s=eta0s, grid=_parse_grid(args),
                           formulation=args.formulation,
                           plot=not args.no_plot)
    for method in methods:
        rows = [r for r in records if r.method == method]
        last = rows[-1]
        rate = tuned[method].chosen_eta0 if method in tuned else args.eta0
        status = "FAILED" if last.failed else f"log_loss={last.log_loss:.4f}"
        print(f"{method}: eta0={rate:g} final {status}")
    print(f"wrote {args.out}")
    return 0


def cmd_compare(args):
    ds = _load(args)
    result = compare_formulations(ds, _parse_grid(args),
                                  _config(args, "umax"), args.out,
                                  plot=not args.no_plot)
    print(f"stable rates: {result.stable_rates}")
    print(f"mean final log-loss ours={result.mean_final_ours!r} "
          f"raman={result.mean_final_raman!r}")
    print(f"avg ratio raman/ours: {result.avg_ratio!r}")
    print(f"wrote {args.out} and {args.out}.meta.json")
    return 0


def cmd_evaluate(args):
    ds = _load(args)
    print(json.dumps(evaluate(ds, args.model), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bigsoftmax",
                     description="Unbiased softmax SGD trainers "
                                 "and experiment harness")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("ingest", help="load a dataset and print a summary")
    _add_data_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("tune", help="grid-search eta0 on a 10% subsample")
    _add_data_flags(p)
    _add_run_flags(p)
    _grid_flag(p)
    p.add_argument("--method", required=True, choices=METHODS)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("train", help="train one method at a fixed eta0")
    _add_data_flags(p)
    _add_run_flags(p)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--eta0", required=True, type=float)
    p.add_argument("--out", default=None, help="model file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("bench",
                       help="tune and run several methods, write CSV + PNG")
    _add_data_flags(p)
    _add_run_flags(p)
    _grid_flag(p)
    p.add_argument("--method", default=None,
                   help="comma-separated methods "
                        f"(default {','.join(DEFAULT_BENCH_METHODS)})")
    p.add_argument("--eta0", type=float, default=None,
                   help="skip tuning and use this rate for all methods")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("compare-formulations",
                       help="run both u-conventions across the grid")
    _add_data_flags(p)
    _add_run_flags(p)
    _grid_flag(p)
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("evaluate", help="exact metrics of a saved model")
    p.add_argument("model", help="model file from train")
    _add_data_flags(p)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TuningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for eta0, reason in sorted(getattr(exc, "failures", {}).items()):
            print(f"  eta0={eta0:g}: {reason}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3
    except BigSoftmaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
