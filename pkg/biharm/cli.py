#!/usr/bin/env python3
"""CLI entry point for biharm."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence
from uuid import uuid4

from .analysis.manufactured import case_names, manufactured_pair
from .analysis.studies import boundary_scaling_study, convergence_study, extended_case, run_verification
from .config_loader import ConfigurationError, RunConfig, dump_run_config, get_settings, load_run_config
from .core.errors import NumericalError, ValidationError
from .core.extension import TraceVariant
from .core.observability import StudyEventLog
from .reporting import Report, emit_report

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERICAL = 2

LOG_LEVELS = ["DEBUG", "INFO", "WARN", "WARNING", "ERROR"]


class UsageParser(argparse.ArgumentParser):
    """Prints usage to stderr and exits 1 on malformed flags."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def setup_logging(level: str = "WARNING") -> None:
    """Configure logging."""
    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
    )


def _shared_flags() -> argparse.ArgumentParser:
    # Defaults stay None so that config file and environment values fall through.
    shared = UsageParser(add_help=False)
    shared.add_argument("--config", type=Path, help="Path to a YAML or JSON RunConfig file")
    shared.add_argument("--dim", type=int, help="Space dimension n")
    shared.add_argument("--m", dest="m_list", help="Comma-separated grid sizes, e.g. 8,16,32,64")
    shared.add_argument("--case", help=f"Manufactured case ({', '.join(case_names())})")
    shared.add_argument("--scheme", help="Boundary scheme: centered or one-sided")
    shared.add_argument("--tol", dest="cg_tol", type=float, help="Relative CG residual tolerance")
    shared.add_argument("--maxit", dest="cg_maxit", type=int, help="CG iteration cap (default 50 (m+1)^2)")
    shared.add_argument("--preconditioner", choices=["none", "jacobi"], help="CG preconditioner")
    shared.add_argument("--seed", type=int, help="Seed for the random probes")
    shared.add_argument("--jobs", type=int, help="Worker processes for ladder entries")
    shared.add_argument("--format", choices=["csv", "json", "pretty"], help="Report format")
    shared.add_argument("--out", help="Write the report here instead of stdout")
    shared.add_argument("--log-level", choices=LOG_LEVELS, help="Logging level")
    return shared


def build_parser() -> argparse.ArgumentParser:
    parser = UsageParser(prog="biharm", description="Finite-difference clamped biharmonic solver and analysis toolkit")
    shared = _shared_flags()
    commands = parser.add_subparsers(dest="command", metavar="command")
    commands.required = True
    commands.add_parser("solve", parents=[shared], help="Solve once on the finest --m and summarize the error")
    commands.add_parser("study", parents=[shared], help="Convergence ladder with fitted H2_h rate")
    commands.add_parser("verify", parents=[shared], help="Identity, Poincare, commutation and inverse-trace probes")
    commands.add_parser("boundary-scaling", parents=[shared], help="H^1/2_h scaling of the boundary data")
    return parser


def _overrides(args: argparse.Namespace) -> Dict[str, Any]:
    keys = ("dim", "m_list", "case", "scheme", "cg_tol", "cg_maxit", "preconditioner", "seed", "jobs", "format", "out")
    return {key: getattr(args, key) for key in keys}


def _finest(config: RunConfig, command: str) -> int:
    if len(config.m_list) > 1:
        LOGGER.info("%s uses a single grid; taking m=%d from %s", command, config.m_list[-1], config.m_list)
    return config.m_list[-1]


def _write(report: Report, config: RunConfig) -> None:
    data = emit_report(report, config.format)
    if config.out:
        path = Path(config.out)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(data)
        LOGGER.info("Report written to %s", path)
    else:
        sys.stdout.write(data.decode("utf-8"))
        sys.stdout.flush()


# --------------------------------------------------------------------- #
# Subcommands
# --------------------------------------------------------------------- #
def run_solve(config: RunConfig, events: StudyEventLog) -> int:
    m = _finest(config, "solve")
    report = convergence_study(
        config.case,
        config.scheme,
        [m],
        dim=config.dim,
        tol=config.cg_tol,
        maxit=config.cg_maxit,
        preconditioner=config.preconditioner,
        jobs=1,
        seed=config.seed,
        events=events,
    )
    if not report.complete:
        LOGGER.error("Solve failed: %s", report.failure)
        print(f"error: {report.failure}", file=sys.stderr)
        return EXIT_NUMERICAL
    entry = report.entries[0]
    events.solve_complete(config.dim, m, entry.cg_iters, entry.residual)
    _write(report, config)
    return EXIT_OK


def run_study(config: RunConfig, events: StudyEventLog) -> int:
    report = convergence_study(
        config.case,
        config.scheme,
        config.m_list,
        dim=config.dim,
        tol=config.cg_tol,
        maxit=config.cg_maxit,
        preconditioner=config.preconditioner,
        jobs=config.jobs,
        seed=config.seed,
        events=events,
    )
    if report.entries:
        _write(report, config)
    if not report.complete:
        LOGGER.error("Ladder stopped early: %s", report.failure)
        print(f"error: {report.failure}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def run_verify(config: RunConfig, events: StudyEventLog) -> int:
    report = run_verification(config.dim, _finest(config, "verify"), config.seed, events=events)
    _write(report, config)
    if not report.passed:
        for failure in report.failures():
            LOGGER.error("Probe failed: %s", failure)
        print(f"error: {len(report.failures())} probe(s) failed", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def run_boundary_scaling(config: RunConfig, events: StudyEventLog) -> int:
    case = manufactured_pair(config.case, config.dim)
    report = boundary_scaling_study(
        extended_case(case),
        config.m_list,
        TraceVariant.for_scheme(config.scheme),
        events=events,
    )
    _write(report, config)
    return EXIT_OK


COMMANDS = {
    "solve": run_solve,
    "study": run_study,
    "verify": run_verify,
    "boundary-scaling": run_boundary_scaling,
}


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv`` and run one subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv) if argv is not None else None)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        settings = get_settings()
        setup_logging(args.log_level or settings.log_level)
        config = load_run_config(args.config, _overrides(args))
        LOGGER.debug("Run configuration:\n%s", dump_run_config(config))
        events = StudyEventLog(enabled=settings.events_enabled, default_study_id=uuid4().hex)
        return COMMANDS[args.command](config, events)
    except (ValidationError, ConfigurationError) as exc:
        LOGGER.debug("Validation failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        LOGGER.debug("Numerical failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


run_cli = run


def main() -> int:
    """Main CLI entry point."""
    return run(sys.argv[1:])


__all__: List[str] = ["build_parser", "main", "run", "run_cli", "setup_logging"]


if __name__ == "__main__":
    sys.exit(main())
