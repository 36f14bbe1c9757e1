"""Tests for set valuations, their distributions and the tail/core machinery.

The fixtures draw two independent item types uniform on {1, 2}; values equal
the type, so every expectation below is a small hand computation.
"""

import numpy as np
import pytest

from src.mrf_mechanisms.exceptions import RhoUndefinedError, ValuationTableError, ZeroProbabilityEventError
from src.mrf_mechanisms.mrf import DUMMY_LABEL, Mrf, joint_table
from src.mrf_mechanisms.valuation import (
    SetValuation,
    ValuationDistribution,
    ValuationKind,
    condition_on_tail,
    core_component,
    restrict,
    rho,
    rho_report,
    tail_component,
    tail_event_probabilities,
    tail_pairs,
    threshold_tail,
    val,
    validate_class,
)


def _table(entries: dict) -> SetValuation:
    return SetValuation(
        kind=ValuationKind.SUBADDITIVE_TABLE,
        singleton_values={},
        full_table={frozenset(key): v for key, v in entries.items()},
    )


@pytest.mark.parametrize(
    "fixture, expected",
    [
        # --- Valid Cases ---
        ("additive_uniform", 3.0),  # E[t_0 + t_1]
        ("unit_demand_uniform", 1.75),  # E[max(t_0, t_1)]
        ("subadditive_uniform", 2.625),  # (1.5 + 3 + 3 + 3) / 4
    ],
)
def test_val(request, fixture, expected):
    """Tests the `val` function for the three valuation classes."""
    assert val(request.getfixturevalue(fixture)) == pytest.approx(expected)


def test_set_valuation_value():
    """Tests that sets are evaluated by sum, by max and by lookup, with dummies dropped."""
    singles = {(0, "a"): 1.0, (1, "b"): 2.5}

    additive = SetValuation(kind=ValuationKind.ADDITIVE, singleton_values=singles)
    unit = SetValuation(kind="unit_demand", singleton_values=singles)

    assert additive.value({(0, "a"), (1, "b")}) == 3.5
    assert unit.value({(0, "a"), (1, "b")}) == 2.5
    assert additive.value({(0, "a"), (1, DUMMY_LABEL)}) == 1.0
    assert unit.value(()) == 0.0
    assert unit.kind is ValuationKind.UNIT_DEMAND


def test_set_valuation_lookup_errors():
    """Tests that a missing entry or two types of one item raise ValuationTableError."""
    additive = SetValuation(kind=ValuationKind.ADDITIVE, singleton_values={(0, "a"): 1.0})
    table = _table({(): 0.0, ((0, "a"),): 1.0})

    with pytest.raises(ValuationTableError):
        additive.value({(0, "b")})
    with pytest.raises(ValuationTableError):
        additive.value({(0, "a"), (0, "b")})
    with pytest.raises(ValuationTableError):
        table.value({(0, "a"), (1, "a")})


@pytest.mark.parametrize(
    "kwargs",
    [
        # --- Invalid Cases ---
        dict(kind="subadditive_table", singleton_values={}),  # Table missing
        dict(kind="additive", singleton_values={(0, 1): -1.0}),  # Negative value
        dict(kind="additive", singleton_values={(0, DUMMY_LABEL): 1.0}),  # Dummy carries a value
        dict(kind="additive", singleton_values={}, full_table={frozenset(): 0.0}),  # Table on a non-table kind
        dict(kind="subadditive_table", singleton_values={}, full_table={frozenset(): 1.0}),  # g(empty) != 0
        dict(
            kind="subadditive_table",
            singleton_values={(0, 1): 2.0},
            full_table={frozenset(): 0.0, frozenset({(0, 1)}): 1.0},
        ),  # Singletons disagree with the table
        dict(kind="coverage", singleton_values={}),  # Unknown kind
    ],
)
def test_set_valuation_validation(kwargs):
    """Tests that malformed valuations are rejected at construction."""
    with pytest.raises(ValueError):
        SetValuation(**kwargs)


def test_validate_class_accepts_fixture(subadditive_uniform):
    """Tests that min(sum, 1.5·max) is monotone and subadditive."""
    report = validate_class(subadditive_uniform.g, ((1, 2), (1, 2)))

    assert report.passed
    assert report.violation is None


@pytest.mark.parametrize(
    "pair_value, violation",
    [
        # --- Invalid Cases ---
        (3.0, "not subadditive"),  # 3 > 1 + 1
        (0.5, "not monotone"),  # 0.5 < 1
    ],
)
def test_validate_class_violations(pair_value, violation):
    """Tests that a table breaking monotonicity or subadditivity is flagged with a witness."""
    g = _table({(): 0.0, ((0, 1),): 1.0, ((1, 1),): 1.0, ((0, 1), (1, 1)): pair_value})

    report = validate_class(g, ((1,), (1,)))

    assert not report.passed
    assert report.violation == violation
    assert report.witness


def test_validate_class_missing_entry():
    """Tests that a table missing a typed set is reported, not raised."""
    g = _table({(): 0.0, ((0, 1),): 1.0, ((1, 1),): 1.0})

    report = validate_class(g, ((1,), (1,)))

    assert not report.passed
    assert report.violation.startswith("missing entry")


def test_subset_values_and_singletons(additive_uniform):
    """Tests the per-outcome value matrix over subset bitmasks."""
    outcomes = [outcome for outcome, _ in additive_uniform.support]

    assert outcomes == [(1, 1), (1, 2), (2, 1), (2, 2)]
    np.testing.assert_allclose(additive_uniform.probabilities, [0.25] * 4)
    np.testing.assert_allclose(additive_uniform.subset_values[1], [0.0, 1.0, 2.0, 3.0])
    np.testing.assert_allclose(additive_uniform.singleton_matrix[2], [2.0, 1.0])


def test_restrict(additive_uniform):
    """Tests that restricting to one item keeps the joint and drops the other item's value."""
    single = restrict(additive_uniform, {0})

    assert single.items == (0,)
    assert val(single) == pytest.approx(1.5)
    assert val(restrict(additive_uniform, ())) == 0.0
    with pytest.raises(ValueError):
        restrict(single, {1})


def test_item_set_validation(additive_uniform):
    """Tests that an item set outside the joint's coordinates is rejected."""
    with pytest.raises(ValueError):
        ValuationDistribution(joint=additive_uniform.joint, g=additive_uniform.g, item_set={0, 5})


def test_threshold_tail_and_event_probabilities(additive_uniform):
    """Tests that the value-2 types form the tail and every tail set has probability 1/4."""
    tail = threshold_tail(additive_uniform, 2.0)

    assert tail == {(0, 2), (1, 2)}
    assert tail_pairs(additive_uniform, lambda i, lab: lab == 2) == tail
    probabilities = tail_event_probabilities(additive_uniform, tail)
    assert list(probabilities) == [frozenset(), frozenset({0}), frozenset({1}), frozenset({0, 1})]
    assert all(p == pytest.approx(0.25) for p in probabilities.values())


def test_tail_and_core_split_value(additive_uniform):
    """Tests that the tail and core components of an additive buyer add up to the whole."""
    tail = threshold_tail(additive_uniform, 2.0)

    tail_value = val(tail_component(additive_uniform, tail))
    core_value = val(core_component(additive_uniform, tail))

    assert tail_value == pytest.approx(2.0)
    assert core_value == pytest.approx(1.0)
    assert tail_value + core_value == pytest.approx(val(additive_uniform))


def test_condition_on_tail(additive_uniform):
    """Tests that conditioning on T = {0} pins the types to (2, 1)."""
    tail = threshold_tail(additive_uniform, 2.0)

    given = condition_on_tail(additive_uniform, tail, {0})

    assert given.joint.probability((2, 1)) == pytest.approx(1.0)
    assert val(given) == pytest.approx(3.0)


def test_condition_on_impossible_tail():
    """Tests that conditioning on a tail set of probability zero raises."""
    D = ValuationDistribution(
        joint=joint_table(Mrf(supports=((1,), (1, 2)))),
        g=SetValuation(kind="additive", singleton_values={(0, 1): 1.0, (1, 1): 1.0, (1, 2): 2.0}),
    )

    with pytest.raises(ZeroProbabilityEventError):
        condition_on_tail(D, {(0, 1)}, ())


@pytest.mark.parametrize(
    "fixture, expected",
    [
        # --- Valid Cases ---
        ("additive_uniform", 1.0),  # Each remaining singleton is its own maximum
        ("unit_demand_uniform", 1.0),  # Same for unit demand
        ("subadditive_uniform", 1.0),  # Removing one of two items leaves a singleton
    ],
)
def test_rho_two_items(request, fixture, expected):
    """Tests the `rho` function on two items, where it is always 1."""
    assert rho(request.getfixturevalue(fixture)) == pytest.approx(expected)


def test_rho_three_additive_items():
    """Tests that ρ of an additive buyer is the largest sum-to-max ratio of n - 1 items."""
    D = ValuationDistribution(
        joint=joint_table(Mrf(supports=((1,), (1,), (1,)))),
        g=SetValuation(kind="additive", singleton_values={(i, 1): 1.0 for i in range(3)}),
    )

    report = rho_report(D)

    assert report.value == pytest.approx(2.0)
    assert report.skipped == 0


def test_rho_errors(additive_uniform):
    """Tests that ρ needs two items and at least one nonzero denominator."""
    with pytest.raises(ValueError):
        rho(restrict(additive_uniform, {0}))

    zero = ValuationDistribution(
        joint=additive_uniform.joint,
        g=SetValuation(kind="additive", singleton_values={(i, lab): 0.0 for i in (0, 1) for lab in (1, 2)}),
    )
    with pytest.raises(RhoUndefinedError):
        rho(zero)
