"""
Command-line front end.

Usage::

    stlfleet plan mission.yaml --out results --seed 3 --plot
    stlfleet plan mission.yaml --validate-only results/trajectory.csv

Exit codes: 0 when the plan (or the validated trajectory) reaches ``Success``, 2 when
it does not, 1 on usage or mission-file errors.
"""
import argparse
import sys
from collections.abc import Sequence
from pathlib import Path

from loguru import logger

from stlfleet import __version__
from stlfleet.exceptions import StlFleetException
from stlfleet.export import RunReport, read_trajectory_csv, write_report, write_svg, write_trajectory_csv
from stlfleet.mission_file import load_mission
from stlfleet.planner import PlanStatus, plan, validate_plan, validate_trace

EXIT_SUCCESS = 0
EXIT_USAGE = 1
EXIT_NOT_SATISFIED = 2

TRAJECTORY_FILE = "trajectory.csv"
REPORT_FILE = "report.json"
PLOT_FILE = "trajectory.svg"

LOG_FORMAT = "<green>{time:HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | {message}"


class _ArgumentParser(argparse.ArgumentParser):
    """Argument parser reporting usage errors with exit code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    """The ``stlfleet`` argument parser."""
    parser = _ArgumentParser(prog="stlfleet", description="STL mission planning for quad-rotor fleets.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    plan_parser = commands.add_parser("plan", help="plan trajectories for a mission file")
    plan_parser.add_argument("mission", type=Path, help="YAML mission file")
    plan_parser.add_argument("--out", type=Path, default=Path("."), help="output directory (default: .)")
    plan_parser.add_argument("--seed", type=int, help="random seed of the restarts")
    plan_parser.add_argument("--restarts", type=int, help="number of restarts")
    plan_parser.add_argument("--max-iters", type=int, help="iterations per restart")
    plan_parser.add_argument("--temperature", type=float, help="single smoothing temperature")
    plan_parser.add_argument("--epsilon", type=float, help="minimum robustness of a successful plan, m")
    plan_parser.add_argument("--plot", action="store_true", help=f"also write {PLOT_FILE}")
    plan_parser.add_argument(
        "--validate-only", type=Path, metavar="CSV", help="re-validate a trajectory file instead of planning"
    )
    plan_parser.add_argument("--verbose", "-v", action="store_true", help="log solver progress")
    return parser


def _solver_overrides(args: argparse.Namespace) -> dict:
    overrides = {
        "seed": args.seed,
        "restarts": args.restarts,
        "max_iters": args.max_iters,
        "epsilon": args.epsilon,
    }
    if args.temperature is not None:
        overrides["temperature"] = args.temperature
        overrides["temperature_schedule"] = [args.temperature]
    return {key: value for key, value in overrides.items() if value is not None}


def _configure_logging(verbose: bool) -> None:
    logger.remove()
    logger.add(sys.stderr, level="DEBUG" if verbose else "INFO", format=LOG_FORMAT)
    logger.enable("stlfleet")


def _exit_code(status: PlanStatus) -> int:
    return EXIT_SUCCESS if status == PlanStatus.SUCCESS else EXIT_NOT_SATISFIED


def run(args: argparse.Namespace) -> int:
    """
    Execute a parsed ``plan`` command.

    :param args: Parsed arguments.
    :return: The process exit code.
    """
    try:
        spec = load_mission(args.mission, _solver_overrides(args))
    except StlFleetException as exc:
        logger.error("{}", exc)
        return EXIT_USAGE
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.validate_only is not None:
        try:
            trace = read_trajectory_csv(args.validate_only, spec.ts)
            report = validate_trace(trace, spec)
        except (OSError, StlFleetException) as exc:
            logger.error("{}", exc)
            return EXIT_USAGE
        write_report(RunReport(mission=str(args.mission), status=report.status, validation=report), out / REPORT_FILE)
        print(f"status: {report.status.value}")
        print(f"robustness: {report.robustness!r}")
        print(f"satisfied: {report.satisfied}")
        return _exit_code(report.status)

    result = plan(spec)
    report = validate_plan(result, spec)
    if not report.consistent:
        logger.error("plan status {} disagrees with re-validation {}", result.status.value, report.status.value)
    write_trajectory_csv(result.trace, out / TRAJECTORY_FILE)
    write_report(
        RunReport(
            mission=str(args.mission), status=result.status, validation=report, diagnostics=result.diagnostics
        ),
        out / REPORT_FILE,
    )
    if args.plot:
        write_svg(result.trace, spec.environment, out / PLOT_FILE)
    diagnostics = result.diagnostics
    print(f"status: {result.status.value}")
    print(f"robustness: {result.robustness!r}")
    print(f"smooth robustness: {result.smooth_robustness!r}")
    print(f"wall time: {diagnostics.wall_time_s:.3f} s")
    print(f"restarts: {len(diagnostics.restarts)} (best {diagnostics.best_restart})")
    return _exit_code(result.status)


def main(argv: Sequence[str] | None = None) -> int:
    """Console entry point."""
    args = build_parser().parse_args(argv)
    _configure_logging(args.verbose)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
