"""Runs verification checks over instance pools and renders the CSV reports.

A suite is a list of jobs, one per instance. Each job returns the instance's
result rows; jobs run on a thread pool and their rows are merged back in job
order, so a suite's CSV depends only on its configuration. A job that raises
is turned into a failing row carrying the error message.
"""

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence, Union

from tqdm import tqdm

from .config import BOUND_TOL, RELATIVE_TOL
from .coretail import (
    check_core_claims,
    check_crude_bound,
    check_envelope_dominance,
    check_marginal_mechanism,
    check_tail_claims,
    check_theorems,
    compute_split,
    setting_for,
)
from .exceptions import RhoUndefinedError
from .generator import buyer_class_for, generate_instance, generate_ocrs_instance, generate_prophet_instance
from .instance_io import InstanceDocument, write_menu
from .lp import DenseSimplexSolver
from .mechanisms import brev, incentive_violation, optimal_rev, srev, srev_prime
from .models import BOUND_CHECKS, BoundReport, ExperimentConfig, ResultRow
from .mrf import check_conditioning_bounds, joint_table, max_weighted_degree
from .ocrs import (
    OcrsInstance,
    check_adaptive_guarantee,
    hard_ocrs_instance,
    hard_ocrs_parameters,
    max_alpha,
    verify_ocrs_separation,
)
from .prophet import ProphetInstance, evaluate_instance, hard_instance, verify_lower_bound
from .utils import all_subsets, format_float, get_milliseconds, logger_factory

logger = logger_factory.get_logger(__name__)

#: Columns of the `bounds` suite.
BOUNDS_HEADER = (
    "instance_id",
    "setting",
    "delta_nominal",
    "delta_computed",
    "bound_name",
    "lhs",
    "rhs",
    "slack",
    "pass",
)

#: Columns of the `lp-rev` suite.
LP_REV_HEADER = ("instance_id", "rev_opt", "srev", "brev", "srev_prime", "lp_iterations")

#: Columns of the `prophet` suite.
PROPHET_HEADER = (
    "instance_id",
    "delta_nominal",
    "delta_computed",
    "e_max",
    "alg_value",
    "opt_online",
    "ratio",
    "bound",
    "pass",
)

#: Columns of the `ocrs` suite.
OCRS_HEADER = (
    "instance_id",
    "delta_nominal",
    "delta_computed",
    "alpha_scheme",
    "selectability",
    "max_alpha_hard",
    "bound_4e_minus_delta",
    "pass",
)

#: Exit code when every row passed.
EXIT_OK = 0

#: Exit code when at least one row failed or errored.
EXIT_VIOLATION = 1

#: Exit code for configuration and I/O errors.
EXIT_USAGE = 2

Job = tuple[str, Callable[[], list[ResultRow]]]


def cell(value: Any) -> str:
    """Renders one CSV cell: blanks for None, lowercase booleans, shortest round-trip floats."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def _row(instance_id: str, check: str, lhs: float, rhs: float, passed: bool, /, **columns: Any) -> ResultRow:
    # Positional-only so CSV columns may reuse the names lhs, rhs and check.
    return ResultRow(
        instance_id=instance_id,
        check=check,
        lhs=lhs,
        rhs=rhs,
        passed=passed,
        columns={"instance_id": instance_id, **{k: cell(v) for k, v in columns.items()}},
    )


def error_row(instance_id: str, header: Sequence[str], exc: BaseException) -> ResultRow:
    """Builds the failing row recorded for a job that raised."""
    message = f"error: {type(exc).__name__}: {exc}"
    columns = {name: "" for name in header}
    columns[header[0]] = instance_id
    if "bound_name" in columns:
        columns["bound_name"] = message
    if "pass" in columns:
        columns["pass"] = "false"
    return ResultRow(
        instance_id=instance_id, check="error", lhs=math.nan, rhs=math.nan, passed=False, columns=columns
    )


@dataclass(frozen=True)
class CheckSummary:
    """Aggregate of all rows sharing a check name.

    Attributes:
        check (str): The check name.
        total (int): Number of rows.
        passed (int): Number of passing rows.
        worst_slack (float): Smallest rhs - lhs among rows with finite sides, NaN if none.
        total_ms (int): Wall time of the instances behind the rows.
    """

    check: str
    total: int
    passed: int
    worst_slack: float
    total_ms: int

    def __str__(self) -> str:
        return (
            f"{self.check}: {self.passed}/{self.total} passed, worst slack {self.worst_slack:.6g}, "
            f"{self.total_ms} ms"
        )


def summarize(rows: Iterable[ResultRow]) -> list[CheckSummary]:
    """Groups rows by check name, in order of first appearance."""
    groups: dict[str, list[ResultRow]] = {}
    for row in rows:
        groups.setdefault(row.check, []).append(row)
    summaries = []
    for check, members in groups.items():
        slacks = [r.slack for r in members if math.isfinite(r.lhs) and math.isfinite(r.rhs)]
        summaries.append(
            CheckSummary(
                check=check,
                total=len(members),
                passed=sum(r.passed for r in members),
                worst_slack=min(slacks) if slacks else math.nan,
                total_ms=sum(r.elapsed_ms for r in members),
            )
        )
    return summaries


@dataclass(frozen=True)
class SuiteReport:
    """The merged rows of one suite run.

    Attributes:
        name (str): The suite name.
        header (tuple[str, ...]): The CSV columns.
        rows (tuple[ResultRow, ...]): Rows in job order.
    """

    name: str
    header: tuple[str, ...]
    rows: tuple[ResultRow, ...]

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.passed else EXIT_VIOLATION

    def summaries(self) -> list[CheckSummary]:
        return summarize(self.rows)

    def write_csv(self, path: Union[str, Path]):
        """Writes the header and every row; the file is identical for identical rows."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="", encoding="utf-8") as file:
            writer = csv.DictWriter(file, fieldnames=self.header, lineterminator="\n")
            writer.writeheader()
            for row in self.rows:
                writer.writerow({name: row.columns.get(name, "") for name in self.header})


class SuiteRunner:
    """Dispatches suite jobs to a worker pool and merges their rows.

    Attributes:
        _workers (int): Pool size.
        _progress (bool): Whether a progress bar is shown.
        _logger (logging.Logger): The logger for this runner.
    """

    def __init__(self, *, workers: Optional[int] = None, progress: bool = False, log_level: int = logging.INFO):
        """Initializes the runner.

        Args:
            workers (Optional[int]): Pool size; None means `os.cpu_count()`.
            progress (bool): Show a progress bar while jobs complete.
            log_level (int): The logging level for this runner's logger.

        Raises:
            ValueError: If `workers` is not positive.
        """
        if workers is not None and workers < 1:
            raise ValueError(f"workers must be positive, got {workers}")
        self._workers = workers or os.cpu_count() or 1
        self._progress = progress
        self._logger = logger_factory.get_logger(self.__class__.__name__, level=log_level)

    def _run_job(self, job: Job, header: Sequence[str]) -> list[ResultRow]:
        instance_id, work = job
        start = get_milliseconds()
        try:
            rows = work()
        except Exception as exc:
            self._logger.error(f"Instance {instance_id} failed: {type(exc).__name__}: {exc}")
            rows = [error_row(instance_id, header, exc)]
        elapsed = get_milliseconds() - start
        return [replace(row, elapsed_ms=elapsed) for row in rows]

    def run(self, name: str, header: Sequence[str], jobs: Sequence[Job]) -> SuiteReport:
        """Runs every job and merges the rows in job order.

        Args:
            name (str): The suite name used in logs and the progress bar.
            header (Sequence[str]): The suite's CSV columns.
            jobs (Sequence[Job]): (instance_id, callable) pairs.

        Returns:
            SuiteReport: The merged rows.
        """
        self._logger.info(f"Running suite {name!r}: {len(jobs)} jobs on {self._workers} workers.")
        results: list[list[ResultRow]] = [[] for _ in jobs]
        with ThreadPoolExecutor(max_workers=self._workers) as executor:
            futures = {executor.submit(self._run_job, job, header): index for index, job in enumerate(jobs)}
            for future in tqdm(as_completed(futures), total=len(futures), desc=name, disable=not self._progress):
                results[futures[future]] = future.result()
        report = SuiteReport(name=name, header=tuple(header), rows=tuple(row for rows in results for row in rows))
        for summary in report.summaries():
            log = self._logger.info if summary.passed == summary.total else self._logger.warning
            log(f"[{name}] {summary}")
        return report


# --- Bounds ---


def _conditioning_reports(doc: InstanceDocument, delta: float) -> list[BoundReport]:
    report = check_conditioning_bounds(joint_table(doc.mrf), delta)
    witnesses = {"checked_pairs": report.checked_pairs, "sampled": report.sampled}
    return [
        BoundReport("conditioning_upper", report.max_ratio, math.exp(4 * delta), witnesses, tolerance=RELATIVE_TOL),
        BoundReport("conditioning_lower", math.exp(-4 * delta), report.min_ratio, witnesses, tolerance=RELATIVE_TOL),
    ]


def bound_reports(
    doc: InstanceDocument, checks: Sequence[str] = BOUND_CHECKS, *, solver: Optional[DenseSimplexSolver] = None
) -> list[BoundReport]:
    """Evaluates the selected bound checks on one instance, in `BOUND_CHECKS` order.

    Args:
        doc (InstanceDocument): An instance with a valuation.
        checks (Sequence[str]): Names from `BOUND_CHECKS`.
        solver (Optional[DenseSimplexSolver]): Solver for every revenue LP.

    Returns:
        list[BoundReport]: The reports.

    Raises:
        ValueError: If a check name is unknown.
    """
    unknown = set(checks) - set(BOUND_CHECKS)
    if unknown:
        raise ValueError(f"Unknown checks {sorted(unknown)}; known checks are {BOUND_CHECKS}")
    delta = max_weighted_degree(doc.mrf).delta
    D = doc.valuation_distribution() if set(checks) - {"conditioning"} else None
    needs_rev = {"marginal_mechanism", "crude", "tail", "theorems"} & set(checks)
    rev = optimal_rev(D, solver=solver).revenue if needs_rev else None
    split = compute_split(D, delta) if {"core", "tail"} & set(checks) else None

    reports: list[BoundReport] = []
    for check in (c for c in BOUND_CHECKS if c in checks):
        if check == "conditioning":
            reports.extend(_conditioning_reports(doc, delta))
        elif check == "marginal_mechanism":
            for A in all_subsets(D.items):
                reports.append(check_marginal_mechanism(D, A, D.item_set - A, rev=rev, solver=solver))
        elif check == "crude" and len(D.items) >= 2:
            try:
                reports.append(check_crude_bound(D, delta, rev=rev, solver=solver))
            except RhoUndefinedError as exc:
                reports.append(BoundReport("crude", rev, math.inf, applicable=False, note=str(exc)))
        elif check == "core":
            reports.extend(split.cutoff_reports)
            reports.extend(check_core_claims(D, split))
        elif check == "tail":
            reports.extend(check_tail_claims(D, split, rev=rev, solver=solver))
        elif check == "theorems":
            reports.extend(check_theorems(D, delta, rev=rev, solver=solver))
        elif check == "envelope":
            reports.extend(check_envelope_dominance(D, delta))
    return reports


def bounds_rows(
    doc: InstanceDocument, checks: Sequence[str] = BOUND_CHECKS, *, solver: Optional[DenseSimplexSolver] = None
) -> list[ResultRow]:
    """Renders `bound_reports` as `bounds` rows."""
    delta = max_weighted_degree(doc.mrf).delta
    setting = setting_for(doc.valuation.kind).value if doc.valuation is not None else None
    return [
        _row(
            doc.instance_id,
            report.bound_name,
            report.lhs,
            report.rhs,
            report.passed,
            setting=setting,
            delta_nominal=doc.delta_nominal,
            delta_computed=delta,
            bound_name=report.bound_name,
            lhs=report.lhs,
            rhs=report.rhs,
            slack=report.slack,
            **{"pass": report.passed},
        )
        for report in bound_reports(doc, checks, solver=solver)
    ]


# --- Revenue LP ---


def lp_rev_rows(
    doc: InstanceDocument,
    *,
    menu_dir: Optional[Path] = None,
    solver: Optional[DenseSimplexSolver] = None,
) -> list[ResultRow]:
    """Solves the revenue LP and compares it with the simple mechanisms.

    The row passes when the LP's menu is incentive compatible (re-checked by
    exact evaluation) and Rev(D) is at least each simple mechanism's revenue.
    """
    D = doc.valuation_distribution()
    opt = optimal_rev(D, solver=solver)
    s, b, s_prime = srev(D).revenue, brev(D).revenue, srev_prime(D).revenue
    simple = max(s, b, s_prime)
    violation = incentive_violation(D, opt.menu, opt.assignment) if opt.menu.options else 0.0
    scale = max(1.0, abs(opt.revenue))
    passed = violation <= BOUND_TOL * scale and simple <= opt.revenue + BOUND_TOL * scale
    if menu_dir is not None:
        path = Path(menu_dir) / f"{doc.instance_id}.menu.json"
        write_menu(opt.menu, path, instance_id=doc.instance_id, revenue=opt.revenue)
    return [
        _row(
            doc.instance_id,
            "lp_rev",
            simple,
            opt.revenue,
            passed,
            rev_opt=opt.revenue,
            srev=s,
            brev=b,
            srev_prime=s_prime,
            lp_iterations=opt.iterations,
        )
    ]


# --- Prophet ---


def prophet_rows(instance_id: str, inst: ProphetInstance, policy: str = "geometric") -> list[ResultRow]:
    """Evaluates one prophet instance; the row passes when E[max] ≤ (20Δ+15)·E[ALG]."""
    ev = evaluate_instance(inst, policy)
    report = BoundReport("prophet_guarantee", ev.e_max, ev.bound * ev.alg_value)
    if ev.alg_value > 0:
        ratio = ev.e_max / ev.alg_value
    else:
        ratio = 1.0 if ev.e_max == 0 else math.inf
    return [
        _row(
            instance_id,
            report.bound_name,
            report.lhs,
            report.rhs,
            report.passed,
            delta_nominal=inst.delta_nominal,
            delta_computed=ev.delta_computed,
            e_max=ev.e_max,
            alg_value=ev.alg_value,
            opt_online=ev.opt_online,
            ratio=ratio,
            bound=ev.bound,
            **{"pass": report.passed},
        )
    ]


def prophet_hard_rows(delta: float) -> list[ResultRow]:
    """Verifies the lower-bound construction at `delta`.

    The row's `alg_value` and `opt_online` are the optimal online reward,
    and `bound` is the ratio the construction must reach, (δ + 1)/2.
    """
    inst, cf = hard_instance(delta)
    reports = verify_lower_bound(inst, cf)
    for report in reports:
        if not report.passed:
            logger.warning(f"Hard prophet instance at delta={delta}: {report.bound_name} failed ({report}).")
    by_name = {report.bound_name: report for report in reports}
    online = by_name["prophet_lower_online"].witnesses["value"]
    e_max = by_name["prophet_lower_expected_max"].witnesses["value"]
    ratio_report = by_name["prophet_lower_ratio"]
    passed = all(report.passed for report in reports)
    return [
        _row(
            f"hard-prophet-{format_float(delta)}",
            "prophet_lower_bound",
            ratio_report.lhs,
            ratio_report.rhs,
            passed,
            delta_nominal=delta,
            delta_computed=max_weighted_degree(inst.mrf).delta,
            e_max=e_max,
            alg_value=online,
            opt_online=online,
            ratio=ratio_report.rhs,
            bound=ratio_report.lhs,
            **{"pass": passed},
        )
    ]


# --- OCRS ---


def ocrs_rows(instance_id: str, inst: OcrsInstance) -> list[ResultRow]:
    """Checks the exact-α scheme on one instance; the hard-instance columns stay blank."""
    delta = max_weighted_degree(inst.mrf).delta
    alpha = 1.0 / (1.0 + math.exp(4 * delta))
    reports = check_adaptive_guarantee(inst)
    passed = all(report.passed for report in reports)
    first = reports[0]
    value = first.witnesses["value"] if first.bound_name.startswith("ocrs_adaptive_selectability") else None
    return [
        _row(
            instance_id,
            "ocrs_guarantee",
            alpha,
            math.nan if value is None else value,
            passed,
            delta_nominal=inst.delta_nominal,
            delta_computed=delta,
            alpha_scheme=alpha,
            selectability=value,
            **{"pass": passed},
        )
    ]


def ocrs_hard_rows(delta: float) -> list[ResultRow]:
    """Checks the guarantee and the impossibility bound on the hard path at `delta`."""
    hard = hard_ocrs_instance(delta)
    p, q, n = hard_ocrs_parameters(delta)
    ceiling = max_alpha(p, q, n)
    reports = verify_ocrs_separation(delta)
    for report in reports:
        if not report.passed:
            logger.warning(f"Hard OCRS instance at delta={delta}: {report.bound_name} failed ({report}).")
    passed = all(report.passed for report in reports)
    computed = max_weighted_degree(hard.mrf).delta
    selectability_reports = [r for r in reports if r.bound_name.startswith("ocrs_adaptive_selectability")]
    value = selectability_reports[-1].witnesses["value"] if selectability_reports else None
    bound = 4 * math.exp(-delta)
    return [
        _row(
            f"hard-ocrs-{format_float(delta)}",
            "ocrs_separation",
            ceiling,
            bound,
            passed,
            delta_nominal=delta,
            delta_computed=computed,
            alpha_scheme=1.0 / (1.0 + math.exp(4 * computed)),
            selectability=value,
            max_alpha_hard=ceiling,
            bound_4e_minus_delta=bound,
            **{"pass": passed},
        )
    ]


# --- Job builders ---


def hard_jobs(prefix: str, deltas: Sequence[float], rows: Callable[[float], list[ResultRow]]) -> list[Job]:
    """One job per δ; the job ids match the ids of the rows they produce."""
    return [(f"{prefix}-{format_float(delta)}", lambda delta=delta: rows(delta)) for delta in deltas]


def bounds_jobs(config: ExperimentConfig, *, solver: Optional[DenseSimplexSolver] = None) -> list[Job]:
    """One job per random instance; instance `k` uses seed `config.seed + k`."""
    jobs = []
    for k in range(config.instance_count):
        seed = config.seed + k

        def work(seed=seed, k=k) -> list[ResultRow]:
            doc = generate_instance(config, seed, buyer_class=buyer_class_for(config, k))
            return bounds_rows(doc, config.checks, solver=solver)

        jobs.append((f"instance-{seed}", work))
    return jobs


def lp_rev_jobs(
    config: ExperimentConfig, *, menu_dir: Optional[Path] = None, solver: Optional[DenseSimplexSolver] = None
) -> list[Job]:
    jobs = []
    for k in range(config.instance_count):
        seed = config.seed + k

        def work(seed=seed, k=k) -> list[ResultRow]:
            doc = generate_instance(config, seed, buyer_class=buyer_class_for(config, k))
            return lp_rev_rows(doc, menu_dir=menu_dir, solver=solver)

        jobs.append((f"instance-{seed}", work))
    return jobs


def prophet_jobs(config: ExperimentConfig, *, policy: str = "geometric", hard: bool = True) -> list[Job]:
    """Random prophet instances followed by the hard instances at `config.deltas`."""
    jobs: list[Job] = []
    for k in range(config.instance_count):
        seed = config.seed + k
        instance_id = f"prophet-{seed}"

        def work(seed=seed, instance_id=instance_id) -> list[ResultRow]:
            return prophet_rows(instance_id, generate_prophet_instance(config, seed), policy)

        jobs.append((instance_id, work))
    if hard:
        jobs.extend(hard_jobs("hard-prophet", config.deltas, prophet_hard_rows))
    return jobs


def ocrs_jobs(config: ExperimentConfig, *, hard: bool = True) -> list[Job]:
    """Random OCRS instances followed by the hard paths at `config.deltas`."""
    jobs: list[Job] = []
    for k in range(config.instance_count):
        seed = config.seed + k
        instance_id = f"ocrs-{seed}"

        def work(seed=seed, instance_id=instance_id) -> list[ResultRow]:
            return ocrs_rows(instance_id, generate_ocrs_instance(config, seed))

        jobs.append((instance_id, work))
    if hard:
        jobs.extend(hard_jobs("hard-ocrs", config.deltas, ocrs_hard_rows))
    return jobs

