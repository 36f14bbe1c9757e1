"""Shared Pytest Fixtures for small, exactly solvable instances.

The fixtures build the distributions most tests reason about by hand:

- A coupled binary pair with edge potential ±ln 2, whose joint table is
  (0.4, 0.1, 0.1, 0.4).
- Two independent items with values uniform on {1, 2}, as additive,
  unit-demand and subadditive buyers.
- Two independent fair Bernoulli elements for OCRS.
- A small experiment configuration for suite and CLI tests.
- A seeded random pool of generated instances with up to three items of
  up to three types, buyer classes cycling as in the `bounds` suite.
"""

import math
from typing import Optional

import pytest

from src.mrf_mechanisms.generator import buyer_class_for, generate_instance
from src.mrf_mechanisms.instance_io import InstanceDocument
from src.mrf_mechanisms.models import ExperimentConfig
from src.mrf_mechanisms.mrf import Mrf, joint_table
from src.mrf_mechanisms.ocrs import OcrsInstance
from src.mrf_mechanisms.prophet import ProphetInstance
from src.mrf_mechanisms.valuation import SetValuation, ValuationDistribution, ValuationKind

BETA = math.log(2)

UNIFORM_SUPPORTS = ((1, 2), (1, 2))

#: Seeds drawn from the random pool by the parametrized property tests.
POOL_SEEDS = tuple(range(100, 124)) + (159, 179, 197)


@pytest.fixture
def coupled_pair() -> Mrf:
    """Two binary vertices that prefer to agree: ψ = +ln 2 on equal labels, -ln 2 otherwise."""
    return Mrf(
        supports=((0, 1), (0, 1)),
        hyperedges=((0, 1),),
        edge_potentials=({(a, b): (BETA if a == b else -BETA) for a in (0, 1) for b in (0, 1)},),
    )


@pytest.fixture
def independent_uniform() -> Mrf:
    """Two independent items whose types 1 and 2 are equally likely."""
    return Mrf(supports=UNIFORM_SUPPORTS)


def _singletons(supports) -> dict:
    return {(i, lab): float(lab) for i, labels in enumerate(supports) for lab in labels}


@pytest.fixture
def additive_uniform(independent_uniform) -> ValuationDistribution:
    """An additive buyer over two iid uniform{1, 2} items."""
    g = SetValuation(kind=ValuationKind.ADDITIVE, singleton_values=_singletons(UNIFORM_SUPPORTS))
    return ValuationDistribution(joint=joint_table(independent_uniform), g=g)


@pytest.fixture
def unit_demand_uniform(independent_uniform) -> ValuationDistribution:
    """A unit-demand buyer over two iid uniform{1, 2} items."""
    g = SetValuation(kind=ValuationKind.UNIT_DEMAND, singleton_values=_singletons(UNIFORM_SUPPORTS))
    return ValuationDistribution(joint=joint_table(independent_uniform), g=g)


@pytest.fixture
def subadditive_uniform(independent_uniform) -> ValuationDistribution:
    """A table valuation over two iid uniform{1, 2} items: v(S) = min(sum, 1.5·max)."""
    table = {frozenset(): 0.0}
    for a in (1, 2):
        table[frozenset({(0, a)})] = float(a)
        table[frozenset({(1, a)})] = float(a)
        for b in (1, 2):
            table[frozenset({(0, a), (1, b)})] = min(a + b, 1.5 * max(a, b))
    g = SetValuation(kind=ValuationKind.SUBADDITIVE_TABLE, singleton_values={}, full_table=table)
    return ValuationDistribution(joint=joint_table(independent_uniform), g=g)


@pytest.fixture
def additive_coupled(coupled_pair) -> ValuationDistribution:
    """An additive buyer on the coupled pair; type 0 is worth 1 and type 1 is worth 2."""
    g = SetValuation(
        kind=ValuationKind.ADDITIVE,
        singleton_values={(i, lab): float(lab + 1) for i in (0, 1) for lab in (0, 1)},
    )
    return ValuationDistribution(joint=joint_table(coupled_pair), g=g)


@pytest.fixture
def uniform_prophet(independent_uniform) -> ProphetInstance:
    """Two iid uniform{1, 2} values arriving in index order."""
    return ProphetInstance(mrf=independent_uniform, value_maps=({1: 1.0, 2: 2.0}, {1: 1.0, 2: 2.0}))


@pytest.fixture
def fair_bernoulli_pair() -> OcrsInstance:
    """Two independent elements, each active with probability 1/2."""
    return OcrsInstance(mrf=Mrf(supports=((0, 1), (0, 1))), x=(0.5, 0.5))


@pytest.fixture
def small_config(tmp_path) -> ExperimentConfig:
    """A quick configuration: three instances of at most two items with at most two types."""
    return ExperimentConfig(
        seed=11,
        instance_count=3,
        n_range=(1, 2),
        support_range=(1, 2),
        potential_cap=1.0,
        buyer_class="all",
        output=tmp_path / "out.csv",
        workers=2,
        deltas=(1.0,),
    )


@pytest.fixture(scope="session")
def pool_config() -> ExperimentConfig:
    """The random pool: seeds from 100, at most three items with at most three types, potentials in [-2, 2]."""
    return ExperimentConfig(seed=100, instance_count=100, n_range=(1, 3), support_range=(1, 3), potential_cap=2.0)


@pytest.fixture
def pool_instance(pool_config):
    """Returns a function drawing the pool instance with a given seed, optionally of a fixed buyer class."""

    def draw(seed: int, buyer_class: Optional[str] = None) -> InstanceDocument:
        buyer_class = buyer_class or buyer_class_for(pool_config, seed - pool_config.seed)
        return generate_instance(pool_config, seed, buyer_class=buyer_class)

    return draw


@pytest.fixture(params=POOL_SEEDS, ids=lambda seed: f"seed-{seed}")
def pool_seed(request) -> int:
    """Parametrizes a test over the seeds of the random pool."""
    return request.param
