#!/usr/bin/env python3
"""
Command-line interface for the cisphase constellation designer.
"""

import argparse
import logging
import sys
from pathlib import Path

from .designer import METHODS, ConstellationDesigner
from .errors import CisphaseError, OptimizationError
from .phasing.landscape import POLICIES

EXIT_ERROR = 1


def _phase_list(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated phases, got {text!r}") from None


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cisphase",
        description="Co-design observer phasing and sensor tasking for cislunar target tracking.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", type=Path, required=True, help="Scenario YAML file")
    common.add_argument("--out", type=Path, default=Path("."), help="Output directory")
    common.add_argument("--seed", type=int, default=None, help="Seed for multi-start sampling")
    common.add_argument("--catalog", type=Path, default=None,
                        help="Catalog CSV (overrides the scenario and CISPHASE_CATALOG)")
    common.add_argument("--verbose", action="store_true", help="Debug logging")
    common.add_argument("--pdf-report", action="store_true", help="Also render the run report as PDF")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("propagate", parents=[common], help="Write an orbit's trajectory over the grid")
    p.add_argument("--orbit", required=True, help="Catalog orbit id")
    p.add_argument("--phase", type=float, default=0.0, help="Initial phase in [0, 1)")

    p = sub.add_parser("scan", parents=[common], help="Sweep one observer's phase")
    p.add_argument("--observer", type=int, required=True)
    p.add_argument("--phases", type=_positive_int, required=True, help="Number of phases P")
    p.add_argument("--policy", choices=POLICIES, default="optimal")
    p.add_argument("--objective", choices=["max", "maxmin"], default=None)
    p.add_argument("--clamp", action="store_true", help="Clamp close approaches instead of failing")

    p = sub.add_parser("optimize", parents=[common], help="Search observer phases")
    p.add_argument("--method", choices=METHODS, default="greedy")
    p.add_argument("--objective", choices=["max", "maxmin"], default=None)
    p.add_argument("--starts", type=_positive_int, default=None)
    p.add_argument("--workers", type=_positive_int, default=None)

    p = sub.add_parser("budget", parents=[common], help="Observation budget shares across phases")
    p.add_argument("--phases", type=_positive_int, required=True)
    p.add_argument("--objective", choices=["max", "maxmin"], default=None)
    p.add_argument("--observer", type=int, default=0)

    p = sub.add_parser("validate-ekf", parents=[common], help="Covariance recursion over a schedule")
    p.add_argument("--schedule", type=Path, required=True, help="Schedule CSV (step,observer,target)")
    p.add_argument("--at", type=_phase_list, default=None, help="Observer phases, comma-separated")

    p = sub.add_parser("contour", parents=[common], help="Objective over two observers' phases")
    p.add_argument("--observers", type=int, nargs=2, required=True, metavar=("I", "J"))
    p.add_argument("--phases", type=_positive_int, required=True)
    p.add_argument("--objective", choices=["max", "maxmin"], default=None)

    p = sub.add_parser("separability", parents=[common], help="Sweeps under fixed phases of another observer")
    p.add_argument("--observer", type=int, required=True)
    p.add_argument("--other", type=int, required=True)
    p.add_argument("--fixed", type=_phase_list, required=True, help="Comma-separated phases of --other")
    p.add_argument("--phases", type=_positive_int, required=True)
    p.add_argument("--objective", choices=["max", "maxmin"], default=None)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    # Create configuration
    config = {"PDF_REPORT": args.pdf_report}
    if args.seed is not None:
        config["SEED"] = args.seed
    if getattr(args, "clamp", False):
        config["CLOSE_APPROACH"] = "clamp"
    if getattr(args, "workers", None):
        config["WORKERS"] = args.workers

    command = ["cisphase"] + list(sys.argv[1:] if argv is None else argv)
    try:
        designer = ConstellationDesigner.from_file(args.scenario, config, args.catalog, command)
        kind = getattr(args, "objective", None)
        if args.command == "propagate":
            report = designer.propagate(args.orbit, args.phase, args.out)
        elif args.command == "scan":
            report = designer.scan(args.observer, args.phases, args.policy, args.out, kind)
        elif args.command == "optimize":
            report = designer.optimize(args.method, kind, args.starts, args.out)
        elif args.command == "budget":
            report = designer.budget(args.phases, kind, args.observer, args.out)
        elif args.command == "validate-ekf":
            report = designer.validate_ekf(args.schedule, args.out, args.at)
        elif args.command == "contour":
            report = designer.contour(args.observers, args.phases, args.out, kind)
        else:
            report = designer.separability(args.observer, args.other, args.fixed, args.phases, args.out, kind)
    except OptimizationError as e:
        print(f"❌ {e}")
        for diag in e.diagnostics:
            print(f"   start {diag.get('start', '?')}: {diag.get('error')}")
        return EXIT_ERROR
    except (CisphaseError, ValueError) as e:
        print(f"❌ {e}")
        return EXIT_ERROR
    return report.exit_code


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
