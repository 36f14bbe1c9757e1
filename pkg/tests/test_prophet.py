"""Tests for prophet instances, threshold rules and the path lower-bound construction."""

import math
from itertools import product

import pytest

from src.mrf_mechanisms.exceptions import NoValidHorizonError, SupportSizeError
from src.mrf_mechanisms.generator import generate_prophet_instance
from src.mrf_mechanisms.models import ExperimentConfig
from src.mrf_mechanisms.mrf import Mrf
from src.mrf_mechanisms.prophet import (
    ProphetInstance,
    ThresholdPolicy,
    check_prophet_guarantee,
    evaluate_instance,
    evaluate_policy,
    expected_max,
    expected_max_markov,
    hard_instance,
    level_count,
    optimal_online,
    optimal_online_markov,
    geometric_policy,
    expected_max_closed_form,
    verify_lower_bound,
)


def _best_policy_by_enumeration(inst: ProphetInstance) -> float:
    """Tries every deterministic stop/continue rule over observed prefixes; the last arrival is always taken."""
    joint = inst.joint
    order = inst.order
    prefixes = [
        prefix
        for k in range(inst.n - 1)
        for prefix in product(*(inst.mrf.supports[order[j]] for j in range(k + 1)))
    ]
    best = 0.0
    for decisions in product((False, True), repeat=len(prefixes)):
        stop = dict(zip(prefixes, decisions))
        reward = 0.0
        for outcome, p in joint.items():
            observed = ()
            for step, i in enumerate(order):
                observed += (outcome[i],)
                if step == inst.n - 1 or stop[observed]:
                    reward += p * inst.value_maps[i][outcome[i]]
                    break
        best = max(best, reward)
    return best


def _agreeing_path(length: int, beta: float) -> Mrf:
    agree = {(a, b): (beta if a == b else -beta) for a in (0, 1) for b in (0, 1)}
    return Mrf(
        supports=((0, 1),) * length,
        hyperedges=tuple((i, i + 1) for i in range(length - 1)),
        vertex_potentials=tuple({0: 0.0, 1: 0.3 - 0.2 * i} for i in range(length)),
        edge_potentials=(agree,) * (length - 1),
    )


def test_uniform_pair(uniform_prophet):
    """Tests that stopping on 2 and otherwise waiting matches the prophet on iid uniform{1, 2}."""
    assert expected_max(uniform_prophet) == pytest.approx(1.75)
    assert optimal_online(uniform_prophet) == pytest.approx(1.75)


def test_evaluate_instance(uniform_prophet):
    """Tests the suite row of the uniform pair, including the exact threshold-rule value."""
    evaluation = evaluate_instance(uniform_prophet)

    assert evaluation.delta_computed == 0.0
    assert evaluation.e_max == pytest.approx(1.75)
    assert evaluation.opt_online == pytest.approx(1.75)
    # Levels 0.64 and 1.75 each earn 1.5 and level 4.76 earns nothing.
    assert evaluation.alg_value == pytest.approx(1.0)
    assert evaluation.bound == 15.0
    assert evaluate_instance(uniform_prophet, "optimal").alg_value == pytest.approx(1.75)
    with pytest.raises(ValueError):
        evaluate_instance(uniform_prophet, "greedy")


def test_deterministic_value_policy():
    """Tests that a constant value of 1 is collected by two of the three levels at Δ = 0."""
    inst = ProphetInstance(mrf=Mrf(supports=((1,),)), value_maps=({1: 1.0},))

    policy = geometric_policy(inst, 0.0)

    assert policy.thresholds == pytest.approx((math.exp(-1), 1.0, math.e))
    assert evaluate_policy(inst, policy) == pytest.approx(2 / 3)
    report = check_prophet_guarantee(inst)
    assert report.rhs == pytest.approx(10.0)
    assert report.passed


@pytest.mark.parametrize(
    "delta, expected",
    [
        # --- Valid Cases ---
        (0.0, 1),  # ⌈0⌉ + 1
        (0.25, 2),  # 4Δ = 1 exactly
        (0.3, 3),  # ⌈1.2⌉ + 1
        (1.0, 5),  # 4Δ = 4 exactly
    ],
)
def test_level_count(delta, expected):
    """Tests the `level_count` function at and between integer values of 4Δ."""
    assert level_count(delta) == expected


def test_geometric_policy_validation(uniform_prophet):
    """Tests that a negative Δ or an all-zero instance has no threshold rule."""
    with pytest.raises(ValueError):
        geometric_policy(uniform_prophet, -0.1)

    zero = ProphetInstance(mrf=Mrf(supports=((0, 1),)), value_maps=({0: 0.0, 1: 0.0},))
    with pytest.raises(ValueError):
        geometric_policy(zero, 0.0)
    assert check_prophet_guarantee(zero).passed


@pytest.mark.parametrize("seed", range(10))
def test_optimal_online_matches_policy_enumeration(seed):
    """Tests the prefix DP against every deterministic stopping rule on small random instances."""
    config = ExperimentConfig(seed=seed, n_range=(1, 3), support_range=(1, 2), potential_cap=1.5)
    inst = generate_prophet_instance(config, seed)

    assert optimal_online(inst) == pytest.approx(_best_policy_by_enumeration(inst), abs=1e-12)
    assert optimal_online(inst) <= expected_max(inst) + 1e-12


def test_prophet_guarantee_on_random_pool(pool_config, pool_seed):
    """Tests that the geometric rule meets its guarantee and never beats the online optimum."""
    inst = generate_prophet_instance(pool_config, pool_seed)

    report = check_prophet_guarantee(inst)

    assert report.passed
    assert report.witnesses["alg_value"] <= optimal_online(inst) + 1e-12
    assert optimal_online(inst) <= report.lhs + 1e-12


def test_markov_recursions_agree_with_enumeration():
    """Tests the per-state DPs against the joint-table computations on a path."""
    inst = ProphetInstance(
        mrf=_agreeing_path(4, 0.6),
        value_maps=tuple({0: 0.5 * i, 1: 1.0 + i % 2} for i in range(4)),
    )

    assert expected_max_markov(inst) == pytest.approx(expected_max(inst), abs=1e-12)
    assert optimal_online_markov(inst) == pytest.approx(optimal_online(inst), abs=1e-12)


def test_markov_recursions_need_path_order():
    """Tests that the per-state DPs refuse an arrival order that does not follow the path."""
    inst = ProphetInstance(mrf=_agreeing_path(3, 0.6), value_maps=({0: 0.0, 1: 1.0},) * 3, order=(2, 1, 0))

    with pytest.raises(ValueError):
        optimal_online_markov(inst)
    with pytest.raises(ValueError):
        expected_max_markov(inst)


def test_online_support_cap(uniform_prophet):
    """Tests that the prefix DP refuses supports above its cap."""
    with pytest.raises(SupportSizeError):
        optimal_online(uniform_prophet, support_cap=2)


@pytest.mark.parametrize(
    "delta, horizon",
    [
        # --- Valid Cases ---
        (0.5, 2),
        (1.0, 5),
        (2.0, 11),
    ],
)
def test_hard_instance_horizon(delta, horizon):
    """Tests the horizon n = ⌈ln(2q)/ln(1/2 - q)⌉ of the lower-bound path."""
    inst, cf = hard_instance(delta)

    assert cf.n == horizon
    assert inst.n == horizon + 1
    assert cf.q == pytest.approx(1 / (1 + math.exp(4 * delta)))
    assert inst.delta_nominal == delta


def test_hard_instance_closed_forms():
    """Tests that the online optimum is 1 and every closed form agrees at δ = 1."""
    inst, cf = hard_instance(1.0)

    assert cf.q == pytest.approx(0.017986, abs=1e-6)
    assert optimal_online_markov(inst) == pytest.approx(1.0, abs=1e-9)
    assert cf.r1 == pytest.approx(1.0, abs=1e-9)
    assert expected_max_markov(inst) == pytest.approx(expected_max(inst), rel=1e-12)
    assert expected_max_closed_form(cf.p, cf.q, cf.n) == pytest.approx(expected_max(inst), rel=1e-9)
    assert expected_max(inst) / optimal_online_markov(inst) >= (1.0 + 1) / 2


@pytest.mark.parametrize("delta", [0.5, 1.0, 2.0])
def test_verify_lower_bound(delta):
    """Tests that the lower-bound verification passes for the default δ values."""
    inst, cf = hard_instance(delta)

    reports = verify_lower_bound(inst, cf)

    assert {r.bound_name for r in reports} >= {
        "prophet_lower_online",
        "prophet_lower_expected_max",
        "prophet_lower_recursion",
        "prophet_lower_ratio",
    }
    assert all(r.passed for r in reports), [r for r in reports if not r.passed]


@pytest.mark.parametrize(
    "delta, error",
    [
        # --- Invalid Cases ---
        (0.3, NoValidHorizonError),  # 1/2 - q ≤ 2q
        (0.0, ValueError),  # δ must be positive
        (-1.0, ValueError),
    ],
)
def test_hard_instance_invalid(delta, error):
    """Tests that δ values without a valid construction are rejected."""
    with pytest.raises(error):
        hard_instance(delta)


@pytest.mark.parametrize(
    "kwargs",
    [
        # --- Invalid Cases ---
        dict(value_maps=({1: 1.0},)),  # One map for two vertices
        dict(value_maps=({1: 1.0}, {1: 1.0, 2: 2.0})),  # Map misses a label
        dict(value_maps=({1: -1.0, 2: 1.0}, {1: 1.0, 2: 2.0})),  # Negative value
        dict(value_maps=({1: 1.0, 2: 2.0}, {1: 1.0, 2: 2.0}), order=(0, 0)),  # Not a permutation
    ],
)
def test_prophet_instance_validation(independent_uniform, kwargs):
    """Tests that malformed prophet instances are rejected."""
    with pytest.raises(ValueError):
        ProphetInstance(mrf=independent_uniform, **kwargs)


@pytest.mark.parametrize(
    "levels",
    [
        # --- Invalid Cases ---
        (),  # No level
        ((-1.0, 1.0),),  # Negative threshold
        ((1.0, 0.5), (2.0, 0.4)),  # Weights sum to 0.9
    ],
)
def test_threshold_policy_validation(levels):
    """Tests that malformed threshold rules are rejected."""
    with pytest.raises(ValueError):
        ThresholdPolicy(levels)
