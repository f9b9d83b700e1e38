"""
noether-bench command line: run scenarios, validate scenario files, list builtins

Exit status: 0 when every requested check passes, 1 when a check fails,
2 on any error (bad scenario, singular constraints, divergence).
"""
import argparse
import asyncio
import logging
import sys
from pathlib import Path
from typing import List, Optional

from app.core.config import settings
from app.core.exceptions import NoetherBenchError
from app.services.scenario_service import scenario_service
from app.tasks.scenario_tasks import EXIT_ERROR, EXIT_PASS, combined_status, run_scenarios

logger = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=settings.PROJECT_NAME, description=__doc__.strip().splitlines()[0])
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="integrate scenarios and verify their checks")
    run.add_argument("targets", nargs="+", metavar="scenario", help="builtin name or path to a .scn file")
    run.add_argument("--out", type=Path, default=settings.OUTPUT_DIR, help="output directory")
    run.add_argument("--jobs", type=int, default=settings.DEFAULT_JOBS, help="concurrent scenario runs")
    run.add_argument("--seed", type=int, help="override the scenario seed")
    run.add_argument("--h", type=float, help="override the step size")
    run.add_argument("--steps", type=int, help="override the number of steps")

    check = commands.add_parser("check", help="validate scenario files without integrating")
    check.add_argument("targets", nargs="+", metavar="scenario")

    commands.add_parser("list-builtins", help="list the builtin scenarios")
    return parser


def configure_logging(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def command_run(args: argparse.Namespace) -> int:
    if args.jobs < 1:
        print(f"error: --jobs must be at least 1, got {args.jobs}", file=sys.stderr)
        return EXIT_ERROR
    if args.h is not None and args.h <= 0:
        print(f"error: --h must be positive, got {args.h}", file=sys.stderr)
        return EXIT_ERROR
    if args.steps is not None and args.steps < 1:
        print(f"error: --steps must be at least 1, got {args.steps}", file=sys.stderr)
        return EXIT_ERROR
    outcomes = asyncio.run(
        run_scenarios(args.targets, args.out, jobs=args.jobs, seed=args.seed, h=args.h, steps=args.steps)
    )
    for outcome in outcomes:
        if outcome.status == EXIT_ERROR:
            print(f"error: {outcome.target}: {outcome.message}", file=sys.stderr)
        else:
            verdict = "PASS" if outcome.status == EXIT_PASS else "FAIL"
            print(f"{verdict} {outcome.scenario}: {outcome.message} ({outcome.output})")
    return combined_status(outcomes)


def command_check(args: argparse.Namespace) -> int:
    status = EXIT_PASS
    for target in args.targets:
        try:
            scenario = scenario_service.check(target)
        except NoetherBenchError as exc:
            print(f"error: {target}: {exc}", file=sys.stderr)
            status = EXIT_ERROR
            continue
        print(f"ok {scenario.name}: n={scenario.system.n} k={scenario.system.k} "
              f"symmetries={len(scenario.symmetries)}")
    return status


def command_list_builtins(args: argparse.Namespace) -> int:
    print(scenario_service.format_builtins())
    return EXIT_PASS


COMMANDS = {
    "run": command_run,
    "check": command_check,
    "list-builtins": command_list_builtins,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return COMMANDS[args.command](args)
    except NoetherBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
