"""Defines the data structures shared by the verifiers and the suite runner.

`BoundReport` is the unit every check produces: a named inequality
lhs ≤ rhs with the quantities that realize it. `ResultRow` is one CSV line
of a suite, and `ExperimentConfig` describes a suite run.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

from .config import BOUND_TOL, DEFAULT_SUPPORT_CAP

#: Buyer classes a suite can generate instances for.
BUYER_CLASSES = ("additive", "unit_demand", "subadditive", "all")

#: Checks the `bounds` suite knows how to run, in execution order.
BOUND_CHECKS = (
    "conditioning",
    "marginal_mechanism",
    "crude",
    "core",
    "tail",
    "theorems",
    "envelope",
)


@dataclass(frozen=True)
class BoundReport:
    """A named inequality lhs ≤ rhs evaluated on one instance.

    Attributes:
        bound_name (str): Which inequality was checked.
        lhs (float): The left-hand side.
        rhs (float): The right-hand side.
        witnesses (Mapping[str, Any]): Sets, prices or outcomes realizing the sides.
        tolerance (float): Relative slack granted before the bound counts as violated.
        applicable (bool): False when the inequality's hypothesis does not hold on
            this instance; such reports always pass.
        note (str): Free-form remark shown in logs.
    """

    bound_name: str
    lhs: float
    rhs: float
    witnesses: Mapping[str, Any] = field(default_factory=dict)
    tolerance: float = BOUND_TOL
    applicable: bool = True
    note: str = ""

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        if not self.applicable:
            return True
        if math.isnan(self.lhs) or math.isnan(self.rhs):
            return False
        if math.isinf(self.rhs) and self.rhs > 0:
            return True
        return self.lhs <= self.rhs + self.tolerance * max(1.0, abs(self.rhs))


def equality_report(name: str, value: float, target: float, *, rel_tol: float, **witnesses: Any) -> BoundReport:
    """Expresses `value == target` (up to `rel_tol`) as the report |value - target| ≤ tol."""
    return BoundReport(
        bound_name=name,
        lhs=abs(value - target),
        rhs=rel_tol * max(1.0, abs(target)),
        witnesses={"value": value, "target": target, **witnesses},
        tolerance=0.0,
    )


@dataclass(frozen=True)
class ResultRow:
    """One line of a suite's CSV output.

    Attributes:
        instance_id (str): The instance the row belongs to.
        check (str): The check or bound name.
        lhs (float): Left-hand side of the checked inequality.
        rhs (float): Right-hand side of the checked inequality.
        passed (bool): The verdict.
        elapsed_ms (int): Wall time spent on the instance, for summaries only.
        columns (Mapping[str, str]): The rendered CSV cells, keyed by header.
    """

    instance_id: str
    check: str
    lhs: float
    rhs: float
    passed: bool
    elapsed_ms: int = 0
    columns: Mapping[str, str] = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a suite run depends on.

    Attributes:
        seed (int): Master seed; instance `k` is generated from `seed + k`.
        instance_count (int): Number of random instances.
        n_range (tuple[int, int]): Inclusive range of item counts.
        support_range (tuple[int, int]): Inclusive range of support sizes per item.
        potential_cap (float): Potentials are drawn uniformly from [-cap, cap].
        buyer_class (str): One of `BUYER_CLASSES`; "all" cycles through the three classes.
        checks (tuple[str, ...]): Subset of `BOUND_CHECKS` run by the `bounds` suite.
        output (Path): Output file or directory.
        workers (Optional[int]): Worker-pool size; None means available parallelism.
        deltas (tuple[float, ...]): Nominal δ values for the hard instances.
        progress (bool): Show a progress bar.
    """

    seed: int = 0
    instance_count: int = 10
    n_range: tuple[int, int] = (1, 3)
    support_range: tuple[int, int] = (1, 3)
    potential_cap: float = 1.0
    buyer_class: str = "all"
    checks: tuple[str, ...] = BOUND_CHECKS
    output: Path = Path("results")
    workers: Optional[int] = None
    deltas: tuple[float, ...] = (0.5, 1.0, 2.0)
    progress: bool = False

    def __post_init__(self):
        for name in ("n_range", "support_range"):
            low, high = getattr(self, name)
            if low < 1 or low > high:
                raise ValueError(f"{name} must be a nonempty range of positive integers, got {(low, high)}")
        if self.support_range[1] ** self.n_range[1] > DEFAULT_SUPPORT_CAP:
            raise ValueError(
                f"Support sizes up to {self.support_range[1]} over {self.n_range[1]} items exceed the support cap."
            )
        if self.instance_count < 0:
            raise ValueError(f"instance_count must be nonnegative, got {self.instance_count}")
        if not math.isfinite(self.potential_cap) or self.potential_cap < 0:
            raise ValueError(f"potential_cap must be a finite nonnegative number, got {self.potential_cap}")
        if self.buyer_class not in BUYER_CLASSES:
            raise ValueError(f"buyer_class must be one of {BUYER_CLASSES}, got {self.buyer_class!r}")
        unknown = set(self.checks) - set(BOUND_CHECKS)
        if unknown:
            raise ValueError(f"Unknown checks {sorted(unknown)}; known checks are {BOUND_CHECKS}")
        if self.workers is not None and self.workers < 1:
            raise ValueError(f"workers must be positive, got {self.workers}")
        if any(d <= 0 for d in self.deltas):
            raise ValueError(f"Hard-instance deltas must be positive, got {self.deltas}")
        object.__setattr__(self, "checks", tuple(self.checks))
        object.__setattr__(self, "output", Path(self.output))
