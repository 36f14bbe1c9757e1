"""Command-line entry point.

Subcommands:
    gen         Write random instance files.
    bounds      Check the revenue and conditioning inequalities.
    lp-rev      Compare LP-optimal revenue with the simple mechanisms.
    prophet     Check the prophet guarantee, or verify the hard instance.
    ocrs        Check the OCRS guarantee, or verify the hard path.
    verify-all  Run the four suites and write one CSV per suite.

Exit codes are 0 when every row passes, 1 when a row fails and 2 on
configuration or I/O errors.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from .exceptions import MrfMechanismsError
from .generator import buyer_class_for, generate_instance, generate_ocrs_instance, generate_prophet_instance
from .instance_io import InstanceDocument, read_instance, write_instance
from .lp import DenseSimplexSolver
from .models import BOUND_CHECKS, BUYER_CLASSES, ExperimentConfig
from .suite import (
    BOUNDS_HEADER,
    EXIT_USAGE,
    LP_REV_HEADER,
    OCRS_HEADER,
    PROPHET_HEADER,
    Job,
    SuiteReport,
    SuiteRunner,
    bounds_jobs,
    bounds_rows,
    hard_jobs,
    lp_rev_jobs,
    lp_rev_rows,
    ocrs_hard_rows,
    ocrs_jobs,
    ocrs_rows,
    prophet_hard_rows,
    prophet_jobs,
    prophet_rows,
)
from .utils import logger_factory

logger = logger_factory.get_logger(__name__)

#: Instance kinds `gen` can write.
INSTANCE_KINDS = ("mechanism", "prophet", "ocrs")

#: Default hard-instance δ values.
DEFAULT_DELTAS = (0.5, 1.0, 2.0)


def _add_common_arguments(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--log-level",
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
        default="INFO",
        help="Logging level.",
    )
    parser.add_argument("--seed", type=int, default=0, help="Master seed; instance k uses seed + k.")
    parser.add_argument("--count", type=int, default=10, help="Number of random instances.")
    parser.add_argument("--n-min", type=int, default=1, help="Smallest number of items.")
    parser.add_argument("--n-max", type=int, default=3, help="Largest number of items.")
    parser.add_argument("--support-min", type=int, default=1, help="Smallest support size per item.")
    parser.add_argument("--support-max", type=int, default=3, help="Largest support size per item.")
    parser.add_argument("--potential-cap", type=float, default=1.0, help="Potentials are drawn from [-cap, cap].")
    parser.add_argument(
        "--buyer-class",
        choices=BUYER_CLASSES,
        default="all",
        help="Valuation class of the random instances; 'all' cycles through the three classes.",
    )
    parser.add_argument("--workers", type=int, default=None, help="Worker pool size (default: CPU count).")
    parser.add_argument("--progress", action="store_true", help="Show a progress bar.")


def _add_output(parser: argparse.ArgumentParser, default: str, help_text: str):
    parser.add_argument("--output", type=Path, default=Path(default), help=help_text)


def _add_instances(parser: argparse.ArgumentParser):
    parser.add_argument(
        "--instance",
        type=Path,
        action="append",
        default=[],
        help="Instance file to check instead of a random pool. Repeatable.",
    )


def _add_hard(parser: argparse.ArgumentParser):
    parser.add_argument("--hard-instance", action="store_true", help="Verify the hard construction instead.")
    parser.add_argument(
        "--delta",
        type=float,
        action="append",
        default=[],
        help=f"Nominal delta of the hard construction. Repeatable; default {list(DEFAULT_DELTAS)}.",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mrf-mechanisms",
        description="Exact verification of simple mechanisms, prophet inequalities and OCRS under MRF correlations.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    gen = subparsers.add_parser("gen", help="Write random instance files.")
    _add_common_arguments(gen)
    _add_output(gen, "instances", "Directory for the instance files.")
    gen.add_argument("--kind", choices=INSTANCE_KINDS, default="mechanism", help="Which kind of instance to write.")

    bounds = subparsers.add_parser("bounds", help="Check the revenue and conditioning inequalities.")
    _add_common_arguments(bounds)
    _add_instances(bounds)
    _add_output(bounds, "results/bounds.csv", "CSV file to write.")
    bounds.add_argument(
        "--checks",
        nargs="*",
        choices=BOUND_CHECKS,
        default=list(BOUND_CHECKS),
        help="Checks to run (default: all).",
    )

    lp_rev = subparsers.add_parser("lp-rev", help="Compare LP-optimal revenue with the simple mechanisms.")
    _add_common_arguments(lp_rev)
    _add_instances(lp_rev)
    _add_output(lp_rev, "results/lp_rev.csv", "CSV file to write.")
    lp_rev.add_argument("--menu-out", type=Path, default=None, help="Directory for one menu file per instance.")

    prophet = subparsers.add_parser("prophet", help="Check the prophet guarantee or verify the hard instance.")
    _add_common_arguments(prophet)
    _add_instances(prophet)
    _add_hard(prophet)
    _add_output(prophet, "results/prophet.csv", "CSV file to write.")
    prophet.add_argument(
        "--policy",
        choices=("geometric", "optimal"),
        default="geometric",
        help="'geometric' for the geometric threshold rule, 'optimal' for the online optimum.",
    )

    ocrs = subparsers.add_parser("ocrs", help="Check the OCRS guarantee or verify the hard path.")
    _add_common_arguments(ocrs)
    _add_instances(ocrs)
    _add_hard(ocrs)
    _add_output(ocrs, "results/ocrs.csv", "CSV file to write.")

    verify_all = subparsers.add_parser("verify-all", help="Run every suite and write one CSV per suite.")
    _add_common_arguments(verify_all)
    _add_output(verify_all, "results", "Directory for the CSV files.")
    verify_all.add_argument(
        "--delta",
        type=float,
        action="append",
        default=[],
        help=f"Nominal delta of the hard constructions. Repeatable; default {list(DEFAULT_DELTAS)}.",
    )
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    """Builds the experiment configuration from parsed flags.

    Raises:
        ValueError: If the flags describe an invalid configuration.
    """
    return ExperimentConfig(
        seed=args.seed,
        instance_count=args.count,
        n_range=(args.n_min, args.n_max),
        support_range=(args.support_min, args.support_max),
        potential_cap=args.potential_cap,
        buyer_class=args.buyer_class,
        checks=tuple(getattr(args, "checks", BOUND_CHECKS)),
        output=args.output,
        workers=args.workers,
        deltas=tuple(getattr(args, "delta", None) or DEFAULT_DELTAS),
        progress=args.progress,
    )


def _print_summary(report: SuiteReport):
    for summary in report.summaries():
        print(f"[{report.name}] {summary}")
    verdict = "PASS" if report.passed else "FAIL"
    print(f"[{report.name}] {verdict}: {sum(r.passed for r in report.rows)}/{len(report.rows)} rows passed")


def _run_and_write(runner: SuiteRunner, name: str, header: Sequence[str], jobs: list[Job], path: Path) -> int:
    report = runner.run(name, header, jobs)
    report.write_csv(path)
    _print_summary(report)
    return report.exit_code


def _generate(config: ExperimentConfig, kind: str) -> int:
    config.output.mkdir(parents=True, exist_ok=True)
    for k in range(config.instance_count):
        seed = config.seed + k
        if kind == "mechanism":
            doc = generate_instance(config, seed, buyer_class=buyer_class_for(config, k))
        elif kind == "prophet":
            doc = InstanceDocument.from_prophet(f"prophet-{seed}", generate_prophet_instance(config, seed))
        else:
            doc = InstanceDocument.from_ocrs(f"ocrs-{seed}", generate_ocrs_instance(config, seed))
        write_instance(doc, config.output / f"{doc.instance_id}.json")
    print(f"Wrote {config.instance_count} {kind} instances to {config.output}")
    return 0


def _dispatch(args: argparse.Namespace, config: ExperimentConfig, log_level: int) -> int:
    command = args.command
    if command == "gen":
        return _generate(config, args.kind)

    runner = SuiteRunner(workers=config.workers, progress=config.progress, log_level=log_level)
    solver = DenseSimplexSolver(log_level=log_level)
    documents = [read_instance(path) for path in getattr(args, "instance", [])]

    if command == "bounds":
        if documents:
            jobs = [
                (doc.instance_id, lambda doc=doc: bounds_rows(doc, config.checks, solver=solver)) for doc in documents
            ]
        else:
            jobs = bounds_jobs(config, solver=solver)
        return _run_and_write(runner, "bounds", BOUNDS_HEADER, jobs, config.output)

    if command == "lp-rev":
        if args.menu_out is not None:
            args.menu_out.mkdir(parents=True, exist_ok=True)
        if documents:
            jobs = [
                (doc.instance_id, lambda doc=doc: lp_rev_rows(doc, menu_dir=args.menu_out, solver=solver))
                for doc in documents
            ]
        else:
            jobs = lp_rev_jobs(config, menu_dir=args.menu_out, solver=solver)
        return _run_and_write(runner, "lp-rev", LP_REV_HEADER, jobs, config.output)

    if command == "prophet":
        if args.hard_instance:
            jobs = hard_jobs("hard-prophet", config.deltas, prophet_hard_rows)
        elif documents:
            instances = [(doc.instance_id, doc.prophet_instance()) for doc in documents]
            jobs = [(i, lambda i=i, inst=inst: prophet_rows(i, inst, args.policy)) for i, inst in instances]
        else:
            jobs = prophet_jobs(config, policy=args.policy, hard=False)
        return _run_and_write(runner, "prophet", PROPHET_HEADER, jobs, config.output)

    if command == "ocrs":
        if args.hard_instance:
            jobs = hard_jobs("hard-ocrs", config.deltas, ocrs_hard_rows)
        elif documents:
            instances = [(doc.instance_id, doc.ocrs_instance()) for doc in documents]
            jobs = [(i, lambda i=i, inst=inst: ocrs_rows(i, inst)) for i, inst in instances]
        else:
            jobs = ocrs_jobs(config, hard=False)
        return _run_and_write(runner, "ocrs", OCRS_HEADER, jobs, config.output)

    out = config.output
    codes = [
        _run_and_write(runner, "bounds", BOUNDS_HEADER, bounds_jobs(config, solver=solver), out / "bounds.csv"),
        _run_and_write(runner, "lp-rev", LP_REV_HEADER, lp_rev_jobs(config, solver=solver), out / "lp_rev.csv"),
        _run_and_write(runner, "prophet", PROPHET_HEADER, prophet_jobs(config), out / "prophet.csv"),
        _run_and_write(runner, "ocrs", OCRS_HEADER, ocrs_jobs(config), out / "ocrs.csv"),
    ]
    return max(codes)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parses `argv` and runs the selected subcommand.

    Returns:
        int: The process exit code.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    log_level = getattr(logging, args.log_level)
    try:
        config = config_from_args(args)
        return _dispatch(args, config, log_level)
    except (ValueError, OSError, MrfMechanismsError) as exc:
        logger.error(f"{args.command}: {type(exc).__name__}: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
