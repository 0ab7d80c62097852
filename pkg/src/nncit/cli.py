"""Command line interface.

Subcommands: test (one CSV, one p-value), bench (replication sweep from a
config file), gof (sampler goodness-of-fit export), timing (variant wall
time comparison), generate (synthetic CSV dump).

Exit codes: 0 on success, 1 when a statistical run fails or a timing
ordering assertion is violated, 2 on bad input.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .bench import (
    build_experiment,
    gof_report,
    parse_config,
    result_record,
    run_experiment,
    timing_report,
)
from .crt import TestConfig, run_nnscit
from .data import IngestionError, load_csv, write_csv
from .mlp import TrainConfig
from .synth import FAMILIES, ScenarioSpec, generate

EXIT_OK = 0
EXIT_RUN_FAILED = 1
EXIT_BAD_INPUT = 2


def _add_test_flags(parser):
    parser.add_argument("--n-resamples", "-M", type=int, default=None,
                        help="number of resampling repetitions")
    parser.add_argument("--k", type=int, default=None,
                        help="neighbor count for the MI statistic")
    parser.add_argument("--alpha", type=float, default=None,
                        help="rejection level")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--variant", choices=("eq5", "eq6", "eq7"),
                        default=None, help="statistic variant")
    parser.add_argument("--cmi-repeats", type=int, default=None,
                        help="classifier-CMI replicates averaged per statistic")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nncit",
        description="Conditional independence testing via 1-NN resampling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser("test", help="run one test on a CSV file")
    p_test.add_argument("csv_path", help="input CSV with header x,y,z1,...,zd")
    _add_test_flags(p_test)
    p_test.add_argument("--output", default=None,
                        help="result record path (default: <csv>.result.json)")

    p_bench = sub.add_parser("bench", help="replication sweep from a config")
    p_bench.add_argument("config", help="key=value config file")
    p_bench.add_argument("--output-dir", default="bench_out")
    p_bench.add_argument("--replications", type=int, default=None)
    p_bench.add_argument("--workers", type=int, default=None)
    p_bench.add_argument("--fresh", action="store_true",
                         help="ignore existing records instead of resuming")
    _add_test_flags(p_bench)

    p_gof = sub.add_parser("gof", help="1-NN sampler goodness-of-fit export")
    p_gof.add_argument("family", choices=("gof-1", "gof-2"))
    p_gof.add_argument("--reference", type=int, default=500,
                       help="reference rows for the 1-NN index")
    p_gof.add_argument("--query", type=int, default=500,
                       help="query rows / sample size per histogram")
    p_gof.add_argument("--d-z", type=int, default=50)
    p_gof.add_argument("--seed", type=int, default=0)
    p_gof.add_argument("--output", default=None,
                       help="histogram CSV path (default: gof_<family>.csv)")

    p_timing = sub.add_parser("timing", help="eq6 vs eq5 wall time per d_z")
    p_timing.add_argument("--d-z", required=True,
                          help="comma-separated d_z grid, e.g. 5,20,50")
    p_timing.add_argument("--n", type=int, default=300)
    p_timing.add_argument("--n-resamples", "-M", type=int, default=20)
    p_timing.add_argument("--seed", type=int, default=0)
    p_timing.add_argument("--epochs", type=int, default=None,
                          help="classifier epoch cap for both variants")
    p_timing.add_argument("--cmi-repeats", type=int, default=None,
                          help="classifier-CMI replicates averaged per statistic")
    p_timing.add_argument("--output", default=None, help="CSV output path")

    p_gen = sub.add_parser("generate", help="write a synthetic CSV")
    p_gen.add_argument("family", choices=FAMILIES)
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--d-z", type=int, required=True)
    p_gen.add_argument("--hypothesis", choices=("H0", "H1"), default=None)
    p_gen.add_argument("--b", type=float, default=2.0)
    p_gen.add_argument("--noise-sd", type=float, default=0.7)
    p_gen.add_argument("--partial-corr", type=float, default=0.5)
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--output", required=True)
    return parser


def _test_config(args, base: TestConfig | None = None) -> TestConfig:
    cfg = base if base is not None else TestConfig(classifier=TrainConfig())
    updates = {}
    if args.n_resamples is not None:
        updates["n_resamples"] = args.n_resamples
    if args.k is not None:
        updates["k"] = args.k
    if args.alpha is not None:
        updates["alpha"] = args.alpha
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.variant is not None:
        updates["variant"] = args.variant
    if args.cmi_repeats is not None:
        updates["cmi_repeats"] = args.cmi_repeats
    if updates:
        cfg = replace(cfg, **updates)
    return cfg


def _cmd_test(args) -> int:
    data = load_csv(args.csv_path)
    cfg = _test_config(args)
    result = run_nnscit(data, cfg)
    print(f"p_value: {result.p_value:.6g}")
    print(f"statistic: {result.statistic:.6g}")
    print(f"decision: {result.decision}")
    out = args.output
    if out is None:
        out = str(args.csv_path) + ".result.json"
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(result_record(result), fh)
        fh.write("\n")
    print(f"record written to {out}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    values = parse_config(args.config)
    exp = build_experiment(values, output_dir=Path(args.output_dir))
    overrides = {}
    if args.replications is not None:
        overrides["replications"] = args.replications
    if args.workers is not None:
        overrides["workers"] = args.workers
    test = _test_config(args, base=exp.test)
    exp = replace(exp, test=test, **overrides)
    report = run_experiment(exp, resume=not args.fresh)
    print(f"family={report.family} hypothesis={report.hypothesis} "
          f"n={report.n} variant={report.variant} alpha={report.alpha}")
    for row in report.rows:
        print(f"d_z={row.d_z} replications={row.replications} "
              f"rejection_rate={row.rejection_rate:.4f} "
              f"mean_p={row.mean_p:.4f} "
              f"mean_wall_time_s={row.mean_wall_time_s:.3f}")
    print(f"records and sweep CSV written to {exp.output_dir}")
    return EXIT_OK


def _cmd_gof(args) -> int:
    report = gof_report(
        args.family,
        n_reference=args.reference,
        n_query=args.query,
        d_z=args.d_z,
        seed=args.seed,
    )
    out = args.output or f"gof_{args.family}.csv"
    report.write_csv(out)
    print(f"l1_distance: {report.l1_distance:.6g}")
    print(f"ks_statistic: {report.ks_statistic:.6g}")
    print(f"histogram written to {out}")
    return EXIT_OK


def _cmd_timing(args) -> int:
    try:
        grid = tuple(int(v) for v in args.d_z.split(","))
    except ValueError:
        raise ValueError(f"bad d_z grid: {args.d_z!r}") from None
    test = TestConfig(n_resamples=args.n_resamples)
    if args.epochs is not None:
        test = replace(test, classifier=TrainConfig(epochs=args.epochs))
    if args.cmi_repeats is not None:
        test = replace(test, cmi_repeats=args.cmi_repeats)
    rows = timing_report(grid, n=args.n, n_resamples=args.n_resamples,
                         seed=args.seed, test=test)
    print("d_z,seconds_eq6,seconds_eq5,p_eq6,p_eq5")
    for row in rows:
        print(f"{row.d_z},{row.seconds_eq6:.4f},{row.seconds_eq5:.4f},"
              f"{row.p_eq6:.6g},{row.p_eq5:.6g}")
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write("d_z,seconds_eq6,seconds_eq5,p_eq6,p_eq5\n")
            for row in rows:
                fh.write(f"{row.d_z},{row.seconds_eq6!r},{row.seconds_eq5!r},"
                         f"{row.p_eq6!r},{row.p_eq5!r}\n")
        print(f"timing report written to {args.output}")
    bad = [row.d_z for row in rows if not row.ordering_ok]
    if bad:
        print(f"timing ordering violated at d_z={bad}: "
              f"expected the two-classifier variant to be faster",
              file=sys.stderr)
        return EXIT_RUN_FAILED
    return EXIT_OK


def _cmd_generate(args) -> int:
    spec_kwargs = {
        "family": args.family,
        "n": args.n,
        "d_z": args.d_z,
        "b": args.b,
        "noise_sd": args.noise_sd,
        "partial_corr": args.partial_corr,
        "seed": args.seed,
    }
    if args.hypothesis is not None:
        spec_kwargs["hypothesis"] = args.hypothesis
    elif args.family == "collider-example-2":
        spec_kwargs["hypothesis"] = "H1"
    spec = ScenarioSpec(**spec_kwargs)
    write_csv(generate(spec), args.output)
    print(f"wrote {spec.n} rows to {args.output}")
    return EXIT_OK


_COMMANDS = {
    "test": _cmd_test,
    "bench": _cmd_bench,
    "gof": _cmd_gof,
    "timing": _cmd_timing,
    "generate": _cmd_generate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (IngestionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except RuntimeError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILED


if __name__ == "__main__":
    sys.exit(main())
