"""Command line entry point: ``mscp {figure1,regression,classification,validate}``.

Exit status is 0 on success, 1 when an invariant fails and 2 for
configuration or usage errors.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys

from .config import ConfigError, ExperimentConfig
from .experiments import run_experiment
from .report import emit_csv, emit_svg
from .validate import run_validate

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _check_writable(path) -> None:
    try:
        with open(path, "a", encoding="utf-8"):
            pass
    except OSError as exc:
        raise ConfigError(f"cannot write {path}: {exc.strerror}") from exc


def _report_ok(report) -> bool:
    for r in report.rows:
        if not (0.0 <= r.mcp <= 1.0 and 0.0 <= r.pfi <= 1.0):
            return False
        if not (r.medl_or_size >= 0 or math.isinf(r.medl_or_size)):
            return False
        if r.task != "classification" and math.isinf(r.medl_or_size) != (r.pfi == 0):
            return False
    return True


def run_task(task: str, args) -> int:
    try:
        cfg = ExperimentConfig.from_json(args.config)
        if cfg.task != task:
            raise ConfigError(f"config is for task {cfg.task!r}, not {task!r}")
        out_csv = args.out_csv or cfg.out_csv
        out_svg = args.out_svg or cfg.out_svg
        if out_csv is None:
            raise ConfigError("no CSV output path (use --out-csv or out_csv)")
        _check_writable(out_csv)
        if out_svg:
            _check_writable(out_svg)
        report = run_experiment(cfg)
    except ConfigError as exc:
        print(f"mscp: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    emit_csv(report, out_csv)
    if out_svg:
        emit_svg(report, out_svg)
    for r in report.rows:
        print(f"{r.method:30s} {r.grid_key:28s} mcp={r.mcp:.3f} pfi={r.pfi:.3f} size={r.medl_or_size:.3f} cond={r.cond_coverage:.3f}")
    if not _report_ok(report):
        print("mscp: metric invariant violated", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mscp", description="Multi-source weighted conformal prediction experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for task in ("figure1", "regression", "classification"):
        p = sub.add_parser(task, help=f"run the {task} experiment")
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out-csv", help="metrics CSV path (overrides out_csv)")
        p.add_argument("--out-svg", help="SVG figure path (overrides out_svg)")
    sub.add_parser("validate", help="run the invariant suites")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.command == "validate":
        return EXIT_OK if run_validate() else EXIT_FAIL
    return run_task(args.command, args)


if __name__ == "__main__":
    sys.exit(main())
