"""Command-line entry: run, validate-drag and convergence subcommands."""

from __future__ import annotations

import argparse
import sys

from .app import convergence_study, load_config, run_case, validate_drag
from .errors import ConfigError, NonConvergenceError, UnderResolvedGeometryError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cutcell",
        description="Cut-cell incompressible flow solver around rigid bodies",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one case and write drag/snapshots")
    p_run.add_argument("config", help="case config file")

    p_val = sub.add_parser(
        "validate-drag",
        help="compare the drag of a fixed-cylinder run against the "
             "short-time analytic law",
    )
    p_val.add_argument("config", help="case config file")
    p_val.add_argument("--threshold", type=float, default=None,
                       help="max allowed relative deviation "
                            "(default: validate.threshold from the config)")

    p_conv = sub.add_parser(
        "convergence",
        help="manufactured-solution refinement study of the elliptic solver",
    )
    p_conv.add_argument("config", help="case config file")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            series, files = run_case(cfg)
            print(f"ran {cfg.prefix}: {len(series)} drag records, "
                  f"{len(files)} files, max div {series.max_div:.3e}")
            return 0
        if args.command == "validate-drag":
            report = validate_drag(cfg, threshold=args.threshold)
            print(report.render(), end="")
            return 0 if report.passed else 1
        report = convergence_study(cfg)
        print(report.render(), end="")
        return 0 if report.passed else 1
    except (ConfigError, UnderResolvedGeometryError, NonConvergenceError,
            OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
