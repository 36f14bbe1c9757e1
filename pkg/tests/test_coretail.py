"""Tests for core-tail splits and the revenue inequalities.

At Δ = 0 the iid uniform{1, 2} additive buyer has SRev = 2, so the cutoff is
2: the value-2 types are the tail and the value-1 types the small core.
"""

import math

import pytest

from src.mrf_mechanisms.coretail import (
    BuyerSetting,
    check_core_claims,
    check_crude_bound,
    check_envelope_dominance,
    check_marginal_mechanism,
    check_tail_claims,
    check_theorems,
    compute_split,
    setting_for,
)
from src.mrf_mechanisms.valuation import ValuationKind


def _assert_all_pass(reports):
    failing = [r for r in reports if not r.passed]
    assert not failing, failing


def test_additive_split(additive_uniform):
    """Tests the cutoff, tail and core pairs of the additive split."""
    split = compute_split(additive_uniform, 0.0)

    assert split.setting is BuyerSetting.ADDITIVE
    assert split.reference_revenue == pytest.approx(2.0)
    assert split.cutoff == pytest.approx(2.0)
    assert split.tail == {(0, 2), (1, 2)}
    assert split.small_core == {(0, 1), (1, 1)}
    assert split.large_core == frozenset()
    assert split.tail_probs == pytest.approx({0: 0.5, 1: 0.5})
    assert split.tail_set((2, 1)) == {0}
    assert split.core_set((2, 1), (0, 1)) == {1}


def test_additive_cutoff_grows_with_delta(additive_uniform):
    """Tests that a positive Δ scales the cutoff by e^{8Δ} and empties the tail here."""
    split = compute_split(additive_uniform, 0.5)

    assert split.cutoff == pytest.approx(2.0 * math.exp(4.0))
    assert split.tail == frozenset()
    assert split.large_core == frozenset()


def test_unit_demand_split(unit_demand_uniform):
    """Tests that the unit-demand cutoff is e·SRev at Δ = 0."""
    split = compute_split(unit_demand_uniform, 0.0)

    assert split.setting is BuyerSetting.UNIT_DEMAND
    assert split.cutoff == pytest.approx(1.5 * math.e)
    assert split.tail == frozenset()


def test_subadditive_split_without_cutoff(subadditive_uniform):
    """Tests that no support value keeps the tail mass below e^{-1}, so the tail is empty."""
    split = compute_split(subadditive_uniform, 0.0)

    assert split.setting is BuyerSetting.SUBADDITIVE
    assert split.cutoff_infeasible
    assert math.isinf(split.cutoff)
    assert split.tail == frozenset()
    assert split.cutoff_reports == ()


@pytest.mark.parametrize(
    "setting",
    [
        # --- Invalid Cases ---
        BuyerSetting.ADDITIVE,  # Unit-demand valuation under an additive split
        "additive",  # The same, by value
    ],
)
def test_split_setting_mismatch(unit_demand_uniform, setting):
    """Tests that a split for a narrower class than the valuation's is rejected."""
    with pytest.raises(ValueError):
        compute_split(unit_demand_uniform, 0.0, setting)


def test_setting_for():
    """Tests the `setting_for` function."""
    assert setting_for(ValuationKind.SUBADDITIVE_TABLE) is BuyerSetting.SUBADDITIVE
    assert setting_for(ValuationKind.UNIT_DEMAND) is BuyerSetting.UNIT_DEMAND


def test_additive_core_claims(additive_uniform):
    """Tests the four additive core inequalities and the core variance value."""
    split = compute_split(additive_uniform, 0.0)

    reports = {r.bound_name: r for r in check_core_claims(additive_uniform, split)}

    assert set(reports) == {"core_log", "core_refined", "core_small", "core_variance"}
    assert reports["core_log"].lhs == pytest.approx(1.0)
    # The small-core bundle is 0, 1 or 2 with probabilities 1/4, 1/2, 1/4.
    assert reports["core_variance"].lhs == pytest.approx(0.5)
    _assert_all_pass(reports.values())


def test_additive_tail_claims(additive_uniform):
    """Tests the tail revenue decomposition: each tail item alone sells at 2."""
    split = compute_split(additive_uniform, 0.0)

    reports = {r.bound_name: r for r in check_tail_claims(additive_uniform, split)}

    assert reports["tail_additive"].lhs == pytest.approx(2.0)
    assert reports["tail_additive"].rhs == pytest.approx(10.0)
    assert reports["tail_additive"].witnesses["per_tail_set"] == pytest.approx({(0,): 2.0, (1,): 2.0, (0, 1): 4.0})
    # Conditioning on T pins the types, so Σ Pr[T=A]·Rev(D_A) = Val(D) = 3.
    assert reports["total_revenue_conditioning"].rhs == pytest.approx(3.0)
    _assert_all_pass(reports.values())


@pytest.mark.parametrize(
    "fixture",
    [
        # --- Valid Cases ---
        "unit_demand_uniform",
        "subadditive_uniform",
    ],
)
def test_claims_pass_for_other_classes(request, fixture):
    """Tests that the core and tail inequalities hold for unit-demand and subadditive buyers."""
    D = request.getfixturevalue(fixture)
    split = compute_split(D, 0.0)

    _assert_all_pass(check_core_claims(D, split) + check_tail_claims(D, split))


def test_theorems(additive_uniform, unit_demand_uniform, subadditive_uniform):
    """Tests which end-to-end bounds each class reports, and that they hold."""
    names = {
        fixture: [r.bound_name for r in check_theorems(D, 0.0)]
        for fixture, D in (
            ("additive", additive_uniform),
            ("unit", unit_demand_uniform),
            ("subadditive", subadditive_uniform),
        )
    }

    assert names["additive"] == [
        "theorem_additive",
        "theorem_additive_log",
        "theorem_subadditive",
        "theorem_subadditive_prime",
    ]
    assert names["unit"] == ["theorem_unit_demand", "theorem_subadditive", "theorem_subadditive_prime"]
    assert names["subadditive"] == ["theorem_subadditive", "theorem_subadditive_prime"]
    for D in (additive_uniform, unit_demand_uniform, subadditive_uniform):
        _assert_all_pass(check_theorems(D, 0.0))


def test_theorems_reuse_given_revenue(additive_uniform):
    """Tests that a supplied Rev(D) is used as the left-hand side."""
    reports = check_theorems(additive_uniform, 0.0, rev=123.0)

    assert all(r.lhs == 123.0 for r in reports)


def test_marginal_mechanism(additive_uniform):
    """Tests Rev(D) ≤ 2·(Val(D^A) + Rev(D^B)) for the split ({0}, {1})."""
    report = check_marginal_mechanism(additive_uniform, {0}, {1})

    assert report.rhs == pytest.approx(5.0)
    assert report.passed
    assert report.witnesses == {"A": [0], "B": [1]}


@pytest.mark.parametrize(
    "A, B",
    [
        # --- Invalid Cases ---
        ({0}, {0, 1}),  # Overlap
        ({0}, set()),  # Does not cover item 1
    ],
)
def test_marginal_mechanism_requires_partition(additive_uniform, A, B):
    """Tests that A and B must partition the items in play."""
    with pytest.raises(ValueError):
        check_marginal_mechanism(additive_uniform, A, B)


def test_crude_bound(additive_uniform):
    """Tests the crude bound with ρ = 1 and Σ Rev_i = 2."""
    report = check_crude_bound(additive_uniform, 0.0)

    assert report.rhs == pytest.approx(8.0)
    assert report.witnesses["rho"] == pytest.approx(1.0)
    assert report.passed


def test_envelope_dominance_independent(additive_uniform):
    """Tests that an independent distribution is its own envelope, so both sides agree at Δ = 0."""
    reports = check_envelope_dominance(additive_uniform, 0.0)

    assert [r.witnesses["threshold"] for r in reports] == [2.0, 3.0, 4.0]
    for report in reports:
        assert report.lhs == pytest.approx(report.rhs)
    _assert_all_pass(reports)


def test_envelope_dominance_coupled(additive_coupled):
    """Tests the envelope inequality on a correlated pair at its own degree."""
    reports = check_envelope_dominance(additive_coupled, math.log(2), thresholds=[3.0])

    assert len(reports) == 1
    # Pr[t_0 + t_1 ≥ 3] = 0.6 while the envelope needs only Pr[· ≥ 3/16].
    assert reports[0].lhs == pytest.approx(0.6)
    _assert_all_pass(reports)
