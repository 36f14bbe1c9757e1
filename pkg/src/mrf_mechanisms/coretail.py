"""Core-tail decompositions and the revenue inequalities built on them.

Every check here returns `BoundReport`s whose two sides are recomputed from
the instance with the exact operations of `valuation` and `mechanisms`:
nothing is estimated. Tail and core valuations are indicator-weighted (an
item counts only while its realized type is on the corresponding side),
and tail revenues are LP optima of the tail valuation conditioned on T = A.
"""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .lp import DenseSimplexSolver
from .mechanisms import brev, optimal_rev, rev_i, srev, srev_prime
from .models import BoundReport
from .mrf import Outcome, independent_envelope
from .utils import logger_factory
from .valuation import (
    TypedPair,
    ValuationDistribution,
    ValuationKind,
    condition_on_tail,
    core_component,
    restrict,
    rho_report,
    tail_component,
    tail_event_probabilities,
    threshold_tail,
    val,
)

logger = logger_factory.get_logger(__name__)


class BuyerSetting(str, Enum):
    ADDITIVE = "additive"
    UNIT_DEMAND = "unit_demand"
    SUBADDITIVE = "subadditive"


def setting_for(kind: ValuationKind) -> BuyerSetting:
    """Returns the narrowest setting a valuation kind belongs to."""
    return {
        ValuationKind.ADDITIVE: BuyerSetting.ADDITIVE,
        ValuationKind.UNIT_DEMAND: BuyerSetting.UNIT_DEMAND,
        ValuationKind.SUBADDITIVE_TABLE: BuyerSetting.SUBADDITIVE,
    }[kind]


@dataclass(frozen=True, eq=False)
class CoreTailSplit:
    """A per-outcome partition of the items in play into tail and core.

    Attributes:
        setting (BuyerSetting): The buyer class the split was built for.
        delta (float): The degree bound used in the cutoff.
        cutoff (float): Types worth at least this much on their own are tail types.
        reference_revenue (float): SRev(D) (SRev′(D) for subadditive buyers).
        tail (frozenset[TypedPair]): The (item, label) pairs that put an item in T.
        tail_probs (dict[int, float]): q_i = Pr[i ∈ T].
        small_core (frozenset[TypedPair]): Additive only: core pairs worth at most r (C_s).
        large_core (frozenset[TypedPair]): Additive only: core pairs worth more than r (C_ℓ).
        cutoff_reports (tuple[BoundReport, ...]): Subadditive only: checks on the cutoff value.
        cutoff_infeasible (bool): Subadditive only: no support value qualified, T ≡ ∅.
    """

    setting: BuyerSetting
    delta: float
    cutoff: float
    reference_revenue: float
    tail: frozenset[TypedPair]
    tail_probs: dict[int, float]
    small_core: frozenset[TypedPair] = frozenset()
    large_core: frozenset[TypedPair] = frozenset()
    cutoff_reports: tuple[BoundReport, ...] = field(default=())
    cutoff_infeasible: bool = False

    def tail_set(self, outcome: Outcome) -> frozenset[int]:
        """Returns T(s), the tail items of an outcome."""
        return frozenset(i for i, lab in enumerate(outcome) if (i, lab) in self.tail)

    def core_set(self, outcome: Outcome, items: Iterable[int]) -> frozenset[int]:
        """Returns C(s) = items \\ T(s)."""
        return frozenset(items) - self.tail_set(outcome)


def _tail_probs(D: ValuationDistribution, tail: frozenset[TypedPair]) -> dict[int, float]:
    probs = {}
    for i in D.items:
        weights = [float((i, lab) in tail) for lab in D.joint.supports[i]]
        probs[i] = float((D.joint.prob * D.joint.coordinate_array(i, weights)).sum())
    return probs


def compute_split(D: ValuationDistribution, delta: float, setting: Optional[BuyerSetting] = None) -> CoreTailSplit:
    """Builds the core-tail split for a buyer class.

    Additive and unit-demand cutoffs are e^{8Δ}·SRev(D) and e^{8Δ+1}·SRev(D).
    The subadditive cutoff is the smallest singleton support value t with
    Σ_i Pr[v(i) ≥ t] ≤ e^{-8Δ-1}; when no value qualifies the cutoff is +inf.

    Args:
        D (ValuationDistribution): The buyer's distribution.
        delta (float): The degree bound Δ.
        setting (Optional[BuyerSetting]): Defaults to the valuation's own class.

    Returns:
        CoreTailSplit: The split.

    Raises:
        ValueError: If the setting does not fit the valuation's class.
    """
    setting = setting_for(D.g.kind) if setting is None else BuyerSetting(setting)
    if setting is BuyerSetting.ADDITIVE and D.g.kind is not ValuationKind.ADDITIVE:
        raise ValueError(f"An additive split needs an additive valuation, got {D.g.kind.value}.")
    if setting is BuyerSetting.UNIT_DEMAND and D.g.kind is not ValuationKind.UNIT_DEMAND:
        raise ValueError(f"A unit-demand split needs a unit-demand valuation, got {D.g.kind.value}.")

    if setting is not BuyerSetting.SUBADDITIVE:
        r = srev(D).revenue
        exponent = 8 * delta if setting is BuyerSetting.ADDITIVE else 8 * delta + 1
        cutoff = math.exp(exponent) * r
        tail = threshold_tail(D, cutoff)
        small, large = frozenset(), frozenset()
        if setting is BuyerSetting.ADDITIVE:
            core_pairs = [(i, lab) for i in D.items for lab in D.joint.supports[i] if (i, lab) not in tail]
            small = frozenset(pair for pair in core_pairs if D.g.value({pair}) <= r)
            large = frozenset(core_pairs) - small
        return CoreTailSplit(
            setting=setting,
            delta=delta,
            cutoff=cutoff,
            reference_revenue=r,
            tail=tail,
            tail_probs=_tail_probs(D, tail),
            small_core=small,
            large_core=large,
        )

    r = srev_prime(D).revenue
    budget = math.exp(-8 * delta - 1)
    singles = D.singleton_matrix
    candidates = np.unique(singles[singles > 0]).tolist() if D.support else []
    cutoff, mass = math.inf, 0.0
    for t in candidates:
        total = float(D.probabilities @ (singles >= t).sum(axis=1))
        if total <= budget:
            cutoff, mass = t, total
            break

    reports: tuple[BoundReport, ...] = ()
    if math.isinf(cutoff):
        logger.warning(f"No support value keeps the tail mass below {budget:.6g}; the tail is empty.")
        tail = frozenset()
    else:
        tail = threshold_tail(D, cutoff)
        revenue_floor = mass * (1 - math.exp(4 * delta) * mass)
        reports = (
            BoundReport(
                bound_name="subadditive_cutoff_revenue",
                lhs=cutoff * revenue_floor,
                rhs=r,
                witnesses={"cutoff": cutoff, "tail_mass": mass},
            ),
            BoundReport(
                bound_name="subadditive_cutoff",
                lhs=cutoff,
                rhs=math.exp(8 * delta + 2) * r,
                witnesses={"cutoff": cutoff, "tail_mass": mass},
                applicable=revenue_floor >= math.exp(-8 * delta - 2),
                note="" if revenue_floor >= math.exp(-8 * delta - 2) else "discrete tail mass below the budget",
            ),
        )
    return CoreTailSplit(
        setting=setting,
        delta=delta,
        cutoff=cutoff,
        reference_revenue=r,
        tail=tail,
        tail_probs=_tail_probs(D, tail),
        cutoff_reports=reports,
        cutoff_infeasible=math.isinf(cutoff),
    )


def check_marginal_mechanism(
    D: ValuationDistribution,
    A: Iterable[int],
    B: Iterable[int],
    *,
    rev: Optional[float] = None,
    solver: Optional[DenseSimplexSolver] = None,
) -> BoundReport:
    """Checks Rev(D) ≤ 2·(Val(D^A) + Rev(D^B)) for a bipartition (A, B) of the items in play.

    Raises:
        ValueError: If A and B do not partition the items in play.
    """
    A, B = frozenset(A), frozenset(B)
    if A & B or A | B != D.item_set:
        raise ValueError(f"{sorted(A)} and {sorted(B)} do not partition the items {sorted(D.item_set)}.")
    lhs = optimal_rev(D, solver=solver).revenue if rev is None else rev
    rhs = 2 * (val(restrict(D, A)) + optimal_rev(restrict(D, B), solver=solver).revenue)
    return BoundReport(bound_name="marginal_mechanism", lhs=lhs, rhs=rhs, witnesses={"A": sorted(A), "B": sorted(B)})


def check_crude_bound(
    D: ValuationDistribution,
    delta: float,
    *,
    rev: Optional[float] = None,
    solver: Optional[DenseSimplexSolver] = None,
) -> BoundReport:
    """Checks Rev(D) ≤ 2(ρ+1)·e^{4Δ}·Σ_i Rev_i(D).

    Raises:
        RhoUndefinedError: If ρ has no positive denominator.
    """
    report = rho_report(D)
    total = sum(rev_i(D, i).revenue for i in D.items)
    lhs = optimal_rev(D, solver=solver).revenue if rev is None else rev
    return BoundReport(
        bound_name="crude",
        lhs=lhs,
        rhs=2 * (report.value + 1) * math.exp(4 * delta) * total,
        witnesses={"rho": report.value, "rho_skipped": report.skipped, "sum_rev_i": total},
    )


def check_core_claims(D: ValuationDistribution, split: CoreTailSplit) -> list[BoundReport]:
    """Checks the core inequalities of the split's buyer class."""
    delta, r = split.delta, split.reference_revenue
    core = core_component(D, split.tail)
    core_value = val(core)
    reports = []
    if split.setting is BuyerSetting.ADDITIVE:
        n = len(D.items)
        small = replace(core, masked=core.masked | split.large_core)
        small_brev = brev(small).revenue
        reports.append(
            BoundReport(
                bound_name="core_log",
                lhs=core_value,
                rhs=(1 + 8 * delta + math.log(max(n, 1))) * r,
                witnesses={"srev": r},
            )
        )
        reports.append(
            BoundReport(
                bound_name="core_refined",
                lhs=core_value,
                rhs=(22 * delta + 1) * r + 35 * (delta + 1) * small_brev,
                witnesses={"srev": r, "brev_small_core": small_brev},
            )
        )
        reports.append(
            BoundReport(
                bound_name="core_small",
                lhs=val(small),
                rhs=r + 35 * (delta + 1) * small_brev,
                witnesses={"srev": r, "brev_small_core": small_brev},
            )
        )
        if small.support and small.item_set:
            values = small.subset_values[:, -1]
            mean = float(small.probabilities @ values)
            variance = float(small.probabilities @ (values - mean) ** 2)
        else:
            mean = variance = 0.0
        reports.append(
            BoundReport(
                bound_name="core_variance",
                lhs=variance,
                rhs=2 * r**2 + (math.exp(4 * delta) - 1) * mean**2,
                witnesses={"mean": mean, "srev": r},
            )
        )
    elif split.setting is BuyerSetting.UNIT_DEMAND:
        reports.append(
            BoundReport(bound_name="core_unit", lhs=core_value, rhs=(22 * delta + 4) * r, witnesses={"srev": r})
        )
    else:
        core_brev = brev(core).revenue
        reports.append(
            BoundReport(
                bound_name="core_subadditive",
                lhs=core_value,
                rhs=(174 * delta + 55) * core_brev + r,
                witnesses={"brev_core": core_brev, "srev_prime": r},
            )
        )
    return reports


def _tail_revenue(
    D: ValuationDistribution, split: CoreTailSplit, solver: Optional[DenseSimplexSolver]
) -> tuple[float, dict]:
    """Returns Σ_A Pr[T=A]·Rev(D^T_A) and the per-A revenues, in sorted-A order."""
    tail_view = tail_component(D, split.tail)
    total, per_set = 0.0, {}
    for A, mass in tail_event_probabilities(D, split.tail).items():
        if not A:
            continue
        revenue = optimal_rev(condition_on_tail(tail_view, split.tail, A), solver=solver).revenue
        per_set[tuple(sorted(A))] = revenue
        total += mass * revenue
    return total, per_set


def check_tail_claims(
    D: ValuationDistribution,
    split: CoreTailSplit,
    *,
    rev: Optional[float] = None,
    solver: Optional[DenseSimplexSolver] = None,
) -> list[BoundReport]:
    """Checks the tail inequalities of the split's buyer class.

    Besides the class-specific tail bound, this reports the law of total
    revenue over the events T = A, and the inequality linking Σ_i Rev_i of
    the tail to the tail's separate-price revenue.
    """
    delta = split.delta
    lhs, per_set = _tail_revenue(D, split, solver)
    tail_view = tail_component(D, split.tail)
    events = tail_event_probabilities(D, split.tail)
    witnesses = {"per_tail_set": per_set, "cutoff": split.cutoff}
    reports = []

    if split.setting is BuyerSetting.ADDITIVE:
        reports.append(BoundReport("tail_additive", lhs, 5 * srev(tail_view).revenue, witnesses))
    elif split.setting is BuyerSetting.UNIT_DEMAND:
        tail_srev = srev(tail_view).revenue
        reports.append(BoundReport("tail_unit", lhs, 3 * tail_srev, witnesses))
        sum_rev = sum(rev_i(tail_view, i).revenue for i in tail_view.items)
        any_tail = sum(mass for A, mass in events.items() if A)
        reports.append(
            BoundReport(
                bound_name="tail_unit_separate",
                lhs=(1 - math.exp(-4 * delta - 1)) * sum_rev,
                rhs=tail_srev,
                witnesses={"sum_rev_i": sum_rev, "tail_probability": any_tail},
                applicable=any_tail <= math.exp(-8 * delta - 1) * (1 + 1e-12),
            )
        )
    else:
        reports.append(BoundReport("tail_subadditive", lhs, 4 * split.reference_revenue, witnesses))
        sum_rev = sum(rev_i(tail_view, i).revenue for i in tail_view.items)
        mass = sum(split.tail_probs.values())
        reports.append(
            BoundReport(
                bound_name="tail_subadditive_separate",
                lhs=sum_rev,
                rhs=2 * srev_prime(tail_view).revenue,
                witnesses={"tail_mass": mass},
                applicable=mass <= math.exp(-8 * delta - 1) * (1 + 1e-12),
            )
        )

    total = 0.0
    for A, mass in events.items():
        total += mass * optimal_rev(condition_on_tail(D, split.tail, A), solver=solver).revenue
    reports.append(
        BoundReport(
            bound_name="total_revenue_conditioning",
            lhs=optimal_rev(D, solver=solver).revenue if rev is None else rev,
            rhs=total,
            witnesses={"tail_sets": [sorted(A) for A in events]},
        )
    )
    return reports


def check_theorems(
    D: ValuationDistribution,
    delta: float,
    *,
    rev: Optional[float] = None,
    solver: Optional[DenseSimplexSolver] = None,
) -> list[BoundReport]:
    """Checks the end-to-end revenue approximations that apply to the valuation's class.

    Additive and unit-demand valuations are subadditive as well, so the
    subadditive bounds are reported for every class.
    """
    if rev is None:
        rev = optimal_rev(D, solver=solver).revenue
    s = srev(D)
    b = brev(D).revenue
    s_prime = srev_prime(D).revenue
    n = max(len(D.items), 1)
    witnesses = {"srev": s.revenue, "brev": b, "srev_prime": s_prime, "grid_restricted": s.grid_restricted}
    reports = []
    if D.g.kind is ValuationKind.ADDITIVE:
        reports.append(
            BoundReport("theorem_additive", rev, (44 * delta + 12) * s.revenue + 70 * (delta + 1) * b, witnesses)
        )
        reports.append(
            BoundReport("theorem_additive_log", rev, (12 + 16 * delta + 2 * math.log(n)) * s.revenue, witnesses)
        )
    elif D.g.kind is ValuationKind.UNIT_DEMAND:
        reports.append(BoundReport("theorem_unit_demand", rev, (44 * delta + 14) * s.revenue, witnesses))
    reports.append(BoundReport("theorem_subadditive", rev, (348 * delta + 110) * b + 10 * s.revenue, witnesses))
    reports.append(BoundReport("theorem_subadditive_prime", rev, (348 * delta + 110) * b + 10 * s_prime, witnesses))
    return reports


def check_envelope_dominance(
    D: ValuationDistribution, delta: float, thresholds: Optional[Iterable[float]] = None
) -> list[BoundReport]:
    """Checks Pr[g(t) ≥ τ] ≤ e^{4Δ}·Pr[g(t^ind) ≥ e^{-4Δ}τ] at every threshold τ.

    Args:
        D (ValuationDistribution): The buyer's distribution.
        delta (float): The degree bound Δ.
        thresholds (Optional[Iterable[float]]): Defaults to the positive support of g(t).
    """
    envelope = replace(D, joint=independent_envelope(D.joint))
    if not D.item_set or not D.support:
        return []
    values = D.subset_values[:, -1]
    envelope_values = envelope.subset_values[:, -1]
    taus = np.unique(values[values > 0]).tolist() if thresholds is None else sorted(thresholds)
    reports = []
    for tau in taus:
        lhs = float(D.probabilities[values >= tau].sum())
        shifted = math.exp(-4 * delta) * tau
        rhs = math.exp(4 * delta) * float(envelope.probabilities[envelope_values >= shifted].sum())
        reports.append(BoundReport("envelope_dominance", lhs, rhs, {"threshold": tau}))
    return reports
