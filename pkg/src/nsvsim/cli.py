"""Command-line front end: run a configuration, resume a snapshot, verify.

Exit codes: 0 on success, 2 for unusable input (bad config, bad snapshot,
unreadable paths), 3 when the fixed-point iteration fails to converge after
the window-halving retries (the last good state is saved next to the CSV),
and 1 when verification completes but at least one check fails.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, parse_config
from .runner import resume, run
from .snapshot import SnapshotError
from .verify import run_verification

log = logging.getLogger(__name__)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--output-dir",
        default=None,
        help="directory for CSV and snapshots (default: output.directory from the config)",
    )
    parser.add_argument(
        "--log-level",
        default="INFO",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        help="logging verbosity (default INFO)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nsv-sim",
        description="Fluid-kinetic solver: viscous incompressible flow drag-coupled "
        "to a phase-space distribution on the 2D torus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="advance a configuration to its end time")
    p_run.add_argument("config", help="path to a key-value configuration document")
    _add_common(p_run)

    p_resume = sub.add_parser("resume", help="continue from a snapshot")
    p_resume.add_argument("snapshot", help="path to a snapshot file")
    p_resume.add_argument(
        "--until", type=float, required=True, help="new end time (must exceed the snapshot time)"
    )
    _add_common(p_resume)

    p_verify = sub.add_parser(
        "verify", help="run the full verification suite and write its report"
    )
    p_verify.add_argument(
        "config",
        help="configuration whose output.directory receives the report and scratch runs",
    )
    _add_common(p_verify)
    return parser


def _read_config(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        if args.command == "run":
            cfg = _read_config(args.config)
            result = run(cfg, output_dir=args.output_dir)
            print(
                f"run finished at t = {result.state.t:.6g}, "
                f"{len(result.ledger.rows)} rows -> {result.csv_path}"
            )
            if result.exit_code != 0:
                print(f"stopped early: {result.message}", file=sys.stderr)
            return result.exit_code

        if args.command == "resume":
            result = resume(args.snapshot, until=args.until, output_dir=args.output_dir)
            print(
                f"resumed to t = {result.state.t:.6g}, "
                f"{len(result.ledger.rows)} new rows -> {result.csv_path}"
            )
            if result.exit_code != 0:
                print(f"stopped early: {result.message}", file=sys.stderr)
            return result.exit_code

        if args.command == "verify":
            cfg = _read_config(args.config)
            out_dir = args.output_dir if args.output_dir is not None else cfg.directory
            report = run_verification(output_dir=out_dir)
            print(report.render(), end="")
            return 0 if report.passed else 1

    except (ConfigError, SnapshotError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable: argparse enforces a known command")


if __name__ == "__main__":
    sys.exit(main())
