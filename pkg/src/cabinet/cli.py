"""Command-line experiment runner.

    cabinet run --scenario s.json --algo cabinet --n 50 --t f10% \
                --batch 5000 --rounds 100 --seed 1 --delay d1:100 \
                --crash strong:2@20 --out run.csv [--figures DIR]
    cabinet compare --scenario s.json --out-dir results/ [--figures]
    cabinet report --csv run.csv [--out-dir DIR]
    cabinet check-scheme --json scheme.json | --n 10 --t 2

Flags override scenario values; CABINET_SEED is the seed fallback.
Exit codes: 0 ok, 2 config error, 3 audit violation, 4 livelock.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (
    EXIT_AUDIT_FAILED,
    EXIT_CONFIG_ERROR,
    EXIT_LIVELOCK,
    EXIT_OK,
    ConfigError,
    Scenario,
    compare_paired,
    metrics_rows,
    parse_crash_flag,
    parse_delay_flag,
    run_experiment,
    summarize,
    write_csv,
)
from .verify import exhaustive_scheme_check
from .weights import generate_scheme, scheme_from_json, scheme_to_json, validate_scheme

__all__ = ["build_parser", "main"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cabinet", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment scenario")
    run.add_argument("--scenario", help="scenario JSON file")
    run.add_argument("--algo", choices=["cabinet", "baseline"])
    run.add_argument("--n", type=int)
    run.add_argument("--t", help="failure threshold: integer or fX%% of n")
    run.add_argument("--batch", type=int)
    run.add_argument("--rounds", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--delay", help="none | d1:<mean> | d2 | d3 | d4")
    run.add_argument("--crash", help="none | {strong|weak|random}:<x>@<round>")
    run.add_argument("--out", help="metrics CSV path")
    run.add_argument("--figures", metavar="DIR", nargs="?", const="",
                     help="also render figures (default: next to the CSV)")

    cmp_ = sub.add_parser("compare", help="paired cabinet-vs-baseline run")
    cmp_.add_argument("--scenario", required=True)
    cmp_.add_argument("--seed", type=int)
    cmp_.add_argument("--out-dir", default=".")
    cmp_.add_argument("--figures", action="store_true")

    rep = sub.add_parser("report", help="render figures from an existing CSV")
    rep.add_argument("--csv", required=True)
    rep.add_argument("--out-dir", help="default: alongside the CSV")

    chk = sub.add_parser("check-scheme", help="validate a weight scheme")
    chk.add_argument("--json", dest="json_path", help="scheme JSON file")
    chk.add_argument("--n", type=int)
    chk.add_argument("--t", type=int)
    return parser


def _cmd_run(args) -> int:
    scenario = Scenario.from_file(args.scenario) if args.scenario else Scenario()
    overrides = {
        "algo": args.algo,
        "n": args.n,
        "t": args.t,
        "batch": args.batch,
        "rounds": args.rounds,
        "seed": args.seed,
    }
    if args.delay is not None:
        overrides["delay"] = parse_delay_flag(args.delay)
    if args.crash is not None:
        overrides["crashes"] = parse_crash_flag(args.crash)
    figures_dir = None
    if args.figures is not None and args.out:
        figures_dir = args.figures or str(Path(args.out).resolve().parent)
    result = run_experiment(scenario, args.out, overrides=overrides, figures_dir=figures_dir)
    if result.error:
        print(f"error: {result.error}", file=sys.stderr)
    for violation in result.violations:
        print(f"audit: {violation.kind}: {violation.detail}", file=sys.stderr)
    if result.exit_code == EXIT_OK:
        for key, value in sorted(result.summary.items()):
            print(f"{key}={value}")
    return result.exit_code


def _cmd_compare(args) -> int:
    scenario = Scenario.from_file(args.scenario).with_overrides(seed=args.seed)
    cmp_result = compare_paired(scenario)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(cmp_result.cabinet_rows, out_dir / "cabinet.csv", cmp_result.cabinet_summary)
    write_csv(cmp_result.baseline_rows, out_dir / "baseline.csv", cmp_result.baseline_summary)
    if args.figures:
        from .plots import render_compare_figures

        render_compare_figures(cmp_result.cabinet_rows, cmp_result.baseline_rows, out_dir)
    print(f"cabinet_mean_commit_latency_ms={cmp_result.cabinet_mean_latency!r}")
    print(f"baseline_mean_commit_latency_ms={cmp_result.baseline_mean_latency!r}")
    return EXIT_OK


def _cmd_report(args) -> int:
    from .plots import load_rows_csv, render_metrics_figures

    csv_path = Path(args.csv)
    rows = load_rows_csv(csv_path)
    if not rows:
        print("error: no metrics rows in CSV", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    out_dir = Path(args.out_dir) if args.out_dir else csv_path.resolve().parent
    for path in render_metrics_figures(rows, out_dir, stem=csv_path.stem):
        print(path)
    return EXIT_OK


def _cmd_check_scheme(args) -> int:
    if args.json_path:
        scheme = scheme_from_json(Path(args.json_path).read_text())
    elif args.n and args.t:
        scheme = generate_scheme(args.n, args.t)
    else:
        print("error: give --json or both --n and --t", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    verdict = validate_scheme(scheme.weights, scheme.ct, scheme.t)
    report = exhaustive_scheme_check(scheme.weights, scheme.ct, scheme.t)
    print(scheme_to_json(scheme))
    print(f"valid={verdict.valid} violated={verdict.violated.value} "
          f"margins=({verdict.margins[0]!r}, {verdict.margins[1]!r})")
    print(f"exhaustive_ok={report.ok}")
    return EXIT_OK if verdict.valid and report.ok else EXIT_AUDIT_FAILED


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "check-scheme":
            return _cmd_check_scheme(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
