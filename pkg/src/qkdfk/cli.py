"""qkdfk CLI entry-point."""

from __future__ import annotations

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path

EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_FAILURE = 3


def main(argv: list[str] | None = None) -> None:
    import qkdfk

    parser = argparse.ArgumentParser(
        prog="qkdfk",
        description="Certified finite-key rates for QKD protocols.",
    )
    parser.add_argument("--version", action="version", version=qkdfk.__version__)
    parser.add_argument(
        "-v", "--verbose",
        action="store_true",
        help="Log solver progress (DEBUG level).",
    )
    sub = parser.add_subparsers(dest="command")

    # --- run ---
    run_p = sub.add_parser("run", help="Run a sweep config")
    run_p.add_argument("config", help="Path to the sweep config (TOML)")
    run_p.add_argument(
        "-o", "--out",
        help="Output file. Default: [output] path of the config, else stdout.",
    )
    run_p.add_argument(
        "-f", "--format",
        choices=["csv", "json"],
        help="Output format (default: from the config, csv).",
    )
    run_p.add_argument(
        "--paths",
        help="Comma-separated entropy paths: vn, min or both.",
    )
    run_p.add_argument(
        "--dump-sdp",
        metavar="DIR",
        help="Write every solved SDP to DIR in sparse text form.",
    )
    run_p.add_argument(
        "--no-timing",
        action="store_true",
        help="Drop the wall-time column so output is byte-reproducible.",
    )
    run_p.add_argument(
        "--strict",
        action="store_true",
        help="Exit with code 3 when any point failed to certify.",
    )
    run_p.add_argument("--workers", type=int, help="Concurrent sweep points.")

    # --- protocols ---
    protocols_p = sub.add_parser("protocols", help="List the protocol catalog")
    protocols_p.add_argument("--json", action="store_true", help="Emit JSON to stdout.")

    # --- check ---
    check_p = sub.add_parser("check", help="Run the self-test corpus")
    check_p.add_argument("--json", action="store_true", help="Emit JSON report to stdout.")
    check_p.add_argument("names", nargs="*", help="Run only these checks.")

    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    if args.command is None:
        parser.print_help()
        sys.exit(0)

    if args.command == "run":
        asyncio.run(_cmd_run(args))
    elif args.command == "protocols":
        _cmd_protocols(args)
    elif args.command == "check":
        _cmd_check(args)


async def _cmd_run(args: argparse.Namespace) -> None:
    from dataclasses import replace

    from qkdfk.sweep.config import ConfigError, SweepConfig, parse_paths
    from qkdfk.sweep.runner import SweepRunner

    try:
        config = SweepConfig.load(args.config)
        solver = config.solver
        if args.workers is not None:
            solver = replace(solver, workers=args.workers)
        config = config.with_overrides(
            paths=parse_paths(args.paths) if args.paths else None,
            output_format=args.format,
            timing=False if args.no_timing else None,
            solver=solver,
        )
        settings = config.pipeline_settings(Path(args.dump_sdp) if args.dump_sdp else None)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        sys.exit(EXIT_CONFIG_ERROR)

    runner = SweepRunner(config, settings=settings)
    report = await runner.run()

    target = args.out or config.output_path
    if target:
        written = report.write(target, config.output_format, timing=config.timing)
        print(f"Written {len(report.rows)} rows to {written} ({report.total_time_s:.1f}s)")
    elif config.output_format == "json":
        print(report.to_json(timing=config.timing))
    else:
        print(report.to_csv(timing=config.timing), end="")

    if report.failures:
        print(f"{len(report.failures)} row(s) not certified", file=sys.stderr)
        if args.strict:
            sys.exit(EXIT_SOLVER_FAILURE)


def _cmd_protocols(args: argparse.Namespace) -> None:
    from qkdfk.protocols.catalog import default_catalog

    protocols = default_catalog().list_protocols()
    if args.json:
        print(json.dumps(protocols, indent=2))
        return

    for p in protocols:
        print(f"{p['name']}: {p['description']}")
        for spec in p["parameters"]:
            lo, hi = spec["range"]
            print(f"  {spec['name']:<10} default {spec['default']:<10.6g} [{lo:.6g}, {hi:.6g}]")
        if p["options"]:
            print(f"  options: {', '.join(p['options'])}")


def _cmd_check(args: argparse.Namespace) -> None:
    from tabulate import tabulate

    from qkdfk.selftest import run_checks

    results = run_checks(args.names or None)
    failed = [r for r in results if not r.passed]

    if args.json:
        print(json.dumps([r.to_dict() for r in results], indent=2))
    else:
        rows = [
            [r.name, "PASS" if r.passed else "FAIL", r.value, r.expected, f"{r.elapsed_s:.2f}s"]
            for r in results
        ]
        print(tabulate(rows, headers=["check", "status", "value", "expected", "time"],
                       floatfmt=".8g"))
        print(f"{len(results) - len(failed)}/{len(results)} passed")

    if failed:
        sys.exit(1)


if __name__ == "__main__":
    main()
