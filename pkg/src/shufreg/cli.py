"""Command-line interface.

Subcommands:
  solve       run one algorithm on a (shuffled) CSV dataset
  synth-grid  synthetic (n, sigma) grid experiment
  seed-sweep  seed-ratio sweep on synthetic or real data
  bench       real-data benchmark of all algorithms with timing

Exit codes: 0 success, 1 usage error, 2 data error, 3 solver
non-convergence (only with --strict).
"""

from __future__ import annotations

import argparse
import csv
import sys

from .core import SeedSet
from .gncr import GncrConfig, gncr_solve
from .baselines import naive_ao, ols_unshuffled
from .harness import (
    DataError,
    ExperimentConfig,
    PreprocessPolicy,
    TrialRecord,
    emit_report,
    load_csv,
    preprocess,
    run_experiment,
)
from .metrics import train_error


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _int_list(text):
    return tuple(int(v) for v in text.split(","))


def _float_list(text):
    return tuple(float(v) for v in text.split(","))


def _add_solver_flags(p):
    p.add_argument("--lambda", dest="lam", type=float, default=None,
                   help="ridge weight (default: scale-aware near-OLS)")
    p.add_argument("--gamma", type=float, default=1.3, help="continuation factor")
    p.add_argument("--mu0", type=float, default=None, help="initial mu (default: auto)")
    p.add_argument("--rng-seed", type=int, default=0)
    p.add_argument("--out", default=None, help="report path (default: stdout summary only)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--strict", action="store_true",
                   help="treat solver non-convergence as a hard failure (exit 3)")


def _build_parser():
    parser = _Parser(prog="shufreg", description="Shuffled linear regression toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one dataset")
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--labels", required=True, help="comma-separated label column names")
    p.add_argument("--seeds-file", default=None,
                   help="CSV with integer columns x_row,y_row of known pairs")
    p.add_argument("--algo", choices=("gncr", "naive", "ols"), default="gncr")
    p.add_argument("--no-preprocess", action="store_true",
                   help="skip outlier removal and column scaling")
    _add_solver_flags(p)

    p = sub.add_parser("synth-grid", help="synthetic (n, sigma) grid experiment")
    p.add_argument("--n-values", type=_int_list, default=(20, 40, 60))
    p.add_argument("--sigmas", type=_float_list, default=(0.0, 0.01, 0.02))
    p.add_argument("--d-x", type=int, default=2)
    p.add_argument("--d-y", type=int, default=1)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--algos", type=lambda s: tuple(s.split(",")), default=("gncr",))
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock seconds (breaks byte-identical reruns)")
    _add_solver_flags(p)

    p = sub.add_parser("seed-sweep", help="seed-ratio sweep")
    p.add_argument("--ratios", type=_float_list, default=(0.0, 0.2, 0.4, 0.6, 0.8))
    p.add_argument("--data", default=None, help="real dataset CSV (default: synthetic)")
    p.add_argument("--labels", default=None, help="label columns for --data")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--d-x", type=int, default=2)
    p.add_argument("--d-y", type=int, default=1)
    p.add_argument("--sigma", type=float, default=0.01)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--timing", action="store_true")
    _add_solver_flags(p)

    p = sub.add_parser("bench", help="benchmark algorithms on a real dataset")
    p.add_argument("--data", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--split", type=float, default=0.8)
    p.add_argument("--algos", type=lambda s: tuple(s.split(",")),
                   default=("ols", "naive", "gncr"))
    _add_solver_flags(p)
    return parser


def _gncr_config(args) -> GncrConfig:
    return GncrConfig(lam=args.lam, gamma=args.gamma, mu0=args.mu0)


def _read_seeds(path) -> SeedSet:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["x_row", "y_row"]:
            raise DataError(f"{path}: expected header 'x_row,y_row'")
        pairs = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                pairs.append((int(row[0]), int(row[1])))
            except (ValueError, IndexError):
                raise DataError(f"{path}: line {lineno}: expected two integers") from None
    try:
        return SeedSet(pairs)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc


def _cmd_solve(args) -> int:
    data = load_csv(args.data, args.labels.split(","))
    if not args.no_preprocess:
        data, _ = preprocess(data, PreprocessPolicy())
    seeds = _read_seeds(args.seeds_file) if args.seeds_file else SeedSet()
    try:
        seeds.validate(data.n)
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    cfg = _gncr_config(args)
    if args.algo == "gncr":
        result = gncr_solve(data, seeds, cfg)
        perm, beta, converged = result.perm, result.beta, result.converged
        stages = len(result.trace)
        inner = sum(st.iterations for st in result.trace)
    elif args.algo == "naive":
        result = naive_ao(data, lam=args.lam)
        perm, beta, converged = result.perm, result.beta, result.converged
        stages, inner = 1, result.trace[0].iterations
    else:
        beta = ols_unshuffled(data, args.lam)
        from .core import Permutation
        perm, converged, stages, inner = Permutation.identity(data.n), True, 0, 0
    err = train_error(data, perm, beta)
    record = TrialRecord(
        mode="real", algorithm=args.algo, n=data.n, d_x=data.d_x, d_y=data.d_y,
        repeat=0, dataset=args.data, train_error=err, converged=converged,
        stages=stages, inner_iters=inner,
    )
    print(f"{args.algo}: n={data.n} d_x={data.d_x} d_y={data.d_y} "
          f"train_error={err:.6f} converged={converged}")
    if args.out:
        emit_report([record], args.format, args.out)
        print(f"report written to {args.out}")
    return 3 if args.strict and not converged else 0


def _run_and_report(cfg, args) -> int:
    records = run_experiment(cfg)
    failures = [r for r in records if r.error is not None]
    for r in failures:
        print(f"trial failed (n={r.n}, sigma={r.sigma}): {r.error}", file=sys.stderr)
    if args.out:
        emit_report(records, args.format, args.out, config=cfg)
        print(f"report written to {args.out} ({len(records)} trials)")
    else:
        from .harness import aggregate
        for key, stats in aggregate(records).items():
            summary = " ".join(f"{m}={s['mean']:.4f}" for m, s in stats.items())
            print(f"{key}: {summary}")
    nonconverged = any(r.converged is False for r in records)
    return 3 if args.strict and (nonconverged or failures) else 0


def _cmd_synth_grid(args) -> int:
    cfg = ExperimentConfig(
        mode="synthetic-grid",
        n_values=args.n_values, sigma_values=args.sigmas,
        d_x=args.d_x, d_y=args.d_y, repeats=args.repeats,
        algorithms=args.algos, gncr=_gncr_config(args),
        rng_seed=args.rng_seed, record_timing=args.timing,
    )
    return _run_and_report(cfg, args)


def _cmd_seed_sweep(args) -> int:
    if args.data and not args.labels:
        raise DataError("--labels is required with --data")
    cfg = ExperimentConfig(
        mode="seed-sweep",
        seed_ratios=args.ratios,
        dataset_path=args.data,
        label_columns=tuple(args.labels.split(",")) if args.labels else (),
        n=args.n, d_x=args.d_x, d_y=args.d_y, sigma=args.sigma,
        repeats=args.repeats, split_ratio=args.split,
        gncr=_gncr_config(args), rng_seed=args.rng_seed,
        record_timing=args.timing,
    )
    return _run_and_report(cfg, args)


def _cmd_bench(args) -> int:
    cfg = ExperimentConfig(
        mode="real",
        dataset_path=args.data,
        label_columns=tuple(args.labels.split(",")),
        repeats=args.repeats, split_ratio=args.split,
        algorithms=args.algos, gncr=_gncr_config(args),
        rng_seed=args.rng_seed, record_timing=True,
    )
    return _run_and_report(cfg, args)


_COMMANDS = {
    "solve": _cmd_solve,
    "synth-grid": _cmd_synth_grid,
    "seed-sweep": _cmd_seed_sweep,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DataError as exc:
        print(f"shufreg: data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"shufreg: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
