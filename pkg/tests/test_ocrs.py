"""Tests for OCRS instances, the exact-α scheme and the stationary hard path.

Two independent fair elements make the forward pass easy to follow: at
α = 1/2 the first is selected with probability 1/2, which leaves it
unselected-and-active with probability 3/8 at the second.
"""

import math

import numpy as np
import pytest

from src.mrf_mechanisms.exceptions import SchemeInfeasibleError
from src.mrf_mechanisms.generator import generate_ocrs_instance
from src.mrf_mechanisms.models import ExperimentConfig
from src.mrf_mechanisms.mrf import Mrf, max_weighted_degree
from src.mrf_mechanisms.ocrs import (
    OcrsInstance,
    OcrsScheme,
    activity_marginals,
    adaptive_scheme,
    check_adaptive_guarantee,
    hard_ocrs_instance,
    hard_ocrs_parameters,
    markov_scheme_lp,
    max_alpha,
    reach_probabilities,
    selectability,
    threshold_scheme,
    verify_ocrs_separation,
    y_closed_form,
    y_recursion,
)


def test_adaptive_scheme(fair_bernoulli_pair):
    """Tests the selection probabilities of the exact-α scheme at α = 1/2."""
    scheme = adaptive_scheme(fair_bernoulli_pair, 0.5)

    assert scheme.selection_probs == pytest.approx((0.5, 2 / 3))
    assert reach_probabilities(fair_bernoulli_pair, scheme).reach == pytest.approx((0.5, 0.375))
    result = selectability(fair_bernoulli_pair, scheme)
    assert result.value == pytest.approx(0.5)
    assert result.ratios == pytest.approx((0.5, 0.5))
    assert result.skipped == ()


def test_adaptive_scheme_infeasible(fair_bernoulli_pair):
    """Tests that α = 1 would need selection probability 2 at the second element."""
    with pytest.raises(SchemeInfeasibleError) as info:
        adaptive_scheme(fair_bernoulli_pair, 1.0)

    assert info.value.index == 1
    assert info.value.probability == pytest.approx(2.0)


@pytest.mark.parametrize("alpha", [0.0, -0.1, 1.5])
def test_adaptive_scheme_alpha_range(fair_bernoulli_pair, alpha):
    """Tests that α must lie in (0, 1]."""
    with pytest.raises(ValueError):
        adaptive_scheme(fair_bernoulli_pair, alpha)


@pytest.mark.parametrize(
    "k, expected",
    [
        # --- Valid Cases ---
        (0, 0.5),  # Greedy: the second element is reached only when the first is inactive
        (1, 0.0),  # The first element is never selected
        (2, 0.0),  # Nothing is selected
    ],
)
def test_threshold_scheme(fair_bernoulli_pair, k, expected):
    """Tests the `threshold_scheme` function on the fair pair."""
    assert selectability(fair_bernoulli_pair, threshold_scheme(fair_bernoulli_pair, k)).value == pytest.approx(
        expected
    )


def test_threshold_scheme_validation(fair_bernoulli_pair):
    """Tests that the threshold position must lie in 0..n."""
    with pytest.raises(ValueError):
        threshold_scheme(fair_bernoulli_pair, 3)


def test_never_active_elements_are_skipped():
    """Tests that elements with x_i = 0 are skipped, and that all-skipped is vacuously 1."""
    inst = OcrsInstance(mrf=Mrf(supports=((0,), (0, 1))), x=(0.0, 0.5))

    result = selectability(inst, adaptive_scheme(inst, 0.5))

    assert result.skipped == (0,)
    assert math.isnan(result.ratios[0])
    assert result.value == pytest.approx(0.5)

    idle = OcrsInstance(mrf=Mrf(supports=((0,),)), x=(0.0,))
    assert selectability(idle, adaptive_scheme(idle, 1.0)).value == 1.0


@pytest.mark.parametrize(
    "supports, potentials, x",
    [
        # --- Invalid Cases ---
        (((0, 1, 2),), (), (0.3,)),  # Three labels
        (((0, 1), (0, 1)), (), (0.5,)),  # Too few probabilities
        (((0, 1), (0, 1)), (), (0.4, 0.5)),  # Does not match the exact marginal
        (((0, 1), (0, 1)), ({0: 0.0, 1: math.log(3)},) * 2, (0.75, 0.75)),  # Sums above 1
        (((0, 1),), (), (1.5,)),  # Outside [0, 1]
    ],
)
def test_ocrs_instance_validation(supports, potentials, x):
    """Tests that malformed OCRS instances are rejected."""
    with pytest.raises(ValueError):
        OcrsInstance(mrf=Mrf(supports=supports, vertex_potentials=potentials), x=x)


def test_ocrs_scheme_validation(fair_bernoulli_pair):
    """Tests that selection probabilities must lie in [0, 1] and match the element count."""
    with pytest.raises(ValueError):
        OcrsScheme(selection_probs=(0.5, 1.2))
    with pytest.raises(ValueError):
        reach_probabilities(fair_bernoulli_pair, OcrsScheme(selection_probs=(0.5,)))


@pytest.mark.parametrize(
    "delta, p, q, elements",
    [
        # --- Valid Cases ---
        (1.0, 0.268941, 0.047426, 6),
        (2.0, 0.119203, 0.002473, 49),
        (3.0, 0.047426, 0.000123, 385),
    ],
)
def test_hard_ocrs_parameters(delta, p, q, elements):
    """Tests p = 1/(1+e^δ), q = 1/(1+e^{3δ}) and the chain length ⌊(p+q)/q⌋."""
    params = hard_ocrs_parameters(delta)

    assert params.p == pytest.approx(p, abs=1e-6)
    assert params.q == pytest.approx(q, abs=1e-6)
    assert params.n + 1 == elements


@pytest.mark.parametrize("delta", [0.0, -1.0])
def test_hard_ocrs_parameters_validation(delta):
    """Tests that δ must be positive."""
    with pytest.raises(ValueError):
        hard_ocrs_parameters(delta)


def test_hard_ocrs_instance_chain():
    """Tests that the hard path is the stationary chain with activity q/(p+q) everywhere."""
    p, q, n = hard_ocrs_parameters(1.0)

    inst = hard_ocrs_instance(1.0)

    assert inst.n == n + 1
    assert max_weighted_degree(inst.mrf).delta == pytest.approx(2.0)
    np.testing.assert_allclose(inst.chain.transition(1)[1], [p, 1 - p], atol=1e-12)
    np.testing.assert_allclose(inst.chain.transition(n)[0], [1 - q, q], atol=1e-12)
    np.testing.assert_allclose(activity_marginals(inst.mrf), [q / (p + q)] * (n + 1), atol=1e-12)


def test_y_closed_form_matches_recursion():
    """Tests the closed form of the drained chain against its iteration."""
    p, q, n = hard_ocrs_parameters(1.0)

    history = y_recursion(p, q, n, 0.1)

    for i, vector in enumerate(history):
        assert y_closed_form(p, q, i, 0.1) == pytest.approx(float(vector[0]), abs=1e-14)


def test_max_alpha():
    """Tests that the largest feasible α empties the last element exactly."""
    p, q, n = hard_ocrs_parameters(1.0)

    ceiling = max_alpha(p, q, n)

    assert 0 < ceiling <= 4 * math.exp(-1.0)
    assert y_closed_form(p, q, n, ceiling) == pytest.approx(0.0, abs=1e-12)
    assert min(float(v[0]) for v in y_recursion(p, q, n, ceiling)) >= -1e-12


@pytest.mark.parametrize(
    "p, q, n",
    [
        # --- Invalid Cases ---
        (0.0, 0.1, 3),  # p outside (0, 1)
        (0.6, 0.5, 3),  # p + q > 1
        (0.2, 0.1, -1),  # Negative index
    ],
)
def test_max_alpha_validation(p, q, n):
    """Tests that invalid chain parameters are rejected."""
    with pytest.raises(ValueError):
        max_alpha(p, q, n)


def test_markov_scheme_lp_on_hard_path():
    """Tests that the best online scheme on the hard path stays below the analytic ceiling."""
    p, q, n = hard_ocrs_parameters(1.0)
    inst = hard_ocrs_instance(1.0)

    lp = markov_scheme_lp(inst)

    assert lp.value <= max_alpha(p, q, n) + 1e-7
    assert selectability(inst, lp.scheme).value == pytest.approx(lp.value, abs=1e-7)


def test_markov_scheme_lp_needs_path(fair_bernoulli_pair):
    """Tests that the scheme LP refuses an MRF that is not a path."""
    with pytest.raises(ValueError):
        markov_scheme_lp(fair_bernoulli_pair)


def test_verify_ocrs_separation():
    """Tests that every separation check passes at δ = 1."""
    reports = verify_ocrs_separation(1.0)

    names = {r.bound_name for r in reports}
    assert {"ocrs_max_alpha_bound", "ocrs_y_closed_form", "ocrs_threshold_search", "ocrs_markov_lp"} <= names
    assert all(r.passed for r in reports), [r for r in reports if not r.passed]


def test_adaptive_guarantee_on_fair_pair(fair_bernoulli_pair):
    """Tests the guarantee rows at Δ = 0, where α = 1/2."""
    reports = check_adaptive_guarantee(fair_bernoulli_pair, name_suffix="x")

    assert [r.bound_name for r in reports] == ["ocrs_adaptive_selectability[x]", "ocrs_reach_floor[x]"]
    assert all(r.passed for r in reports)


@pytest.mark.parametrize("seed", range(8))
def test_adaptive_guarantee_on_generated_instances(seed):
    """Tests the exact-α guarantee on random binary MRFs with total activity at most 1."""
    config = ExperimentConfig(seed=seed, n_range=(1, 4), support_range=(2, 2), potential_cap=0.5)
    inst = generate_ocrs_instance(config, seed)

    reports = check_adaptive_guarantee(inst)

    assert all(r.passed for r in reports), [r for r in reports if not r.passed]
