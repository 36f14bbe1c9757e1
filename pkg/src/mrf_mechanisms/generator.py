"""Random instance generation for the suites.

Every generator is a pure function of the configuration and a seed: the
same pair always yields the same instance, and therefore the same file.
Potentials are rounded to six decimals so that written instances read back
value-exactly.
"""

import math
from typing import Optional

import numpy as np

from .config import GENERATOR_MAX_RETRIES
from .exceptions import MrfMechanismsError
from .instance_io import InstanceDocument
from .models import BUYER_CLASSES, ExperimentConfig
from .mrf import Label, Mrf
from .ocrs import OcrsInstance, activity_marginals
from .prophet import ProphetInstance
from .utils import all_subsets, logger_factory
from .valuation import SetValuation, ValuationKind, validate_class

logger = logger_factory.get_logger(__name__)

#: Singleton values are drawn from {e^{k/2} : 0 ≤ k < VALUE_GRID_SIZE}.
VALUE_GRID_SIZE = 7

#: Decimal places kept for potentials and values.
ROUNDING_DIGITS = 6

#: Probability that a prophet value is zero instead of a grid value.
PROPHET_ZERO_PROBABILITY = 0.25

_CONCRETE_CLASSES = tuple(c for c in BUYER_CLASSES if c != "all")


def buyer_class_for(config: ExperimentConfig, index: int) -> str:
    """Returns the class of the `index`-th instance; "all" cycles through the three classes."""
    if config.buyer_class == "all":
        return _CONCRETE_CLASSES[index % len(_CONCRETE_CLASSES)]
    return config.buyer_class


def _uniform(rng: np.random.Generator, cap: float) -> float:
    return round(float(rng.uniform(-cap, cap)), ROUNDING_DIGITS) if cap > 0 else 0.0


def _grid_value(rng: np.random.Generator) -> float:
    return round(math.exp(int(rng.integers(0, VALUE_GRID_SIZE)) / 2), ROUNDING_DIGITS)


def _random_mrf(rng: np.random.Generator, supports: list[tuple[Label, ...]], cap: float) -> Mrf:
    """Draws hyperedges of size 2-3 and uniform potentials in [-cap, cap]."""
    n = len(supports)
    hyperedges = []
    if n >= 2:
        for _ in range(int(rng.integers(0, n + 1))):
            size = int(rng.integers(2, min(3, n) + 1))
            hyperedges.append(tuple(sorted(int(m) for m in rng.choice(n, size=size, replace=False))))
    vertex_potentials = tuple({lab: _uniform(rng, cap) for lab in labels} for labels in supports)
    edge_potentials = []
    for edge in hyperedges:
        table = {}
        for key in np.ndindex(*(len(supports[m]) for m in edge)):
            table[tuple(supports[m][k] for m, k in zip(edge, key))] = _uniform(rng, cap)
        edge_potentials.append(table)
    return Mrf(
        supports=tuple(supports),
        hyperedges=tuple(hyperedges),
        vertex_potentials=vertex_potentials,
        edge_potentials=tuple(edge_potentials),
    )


def _random_supports(rng: np.random.Generator, config: ExperimentConfig) -> list[tuple[Label, ...]]:
    n = int(rng.integers(config.n_range[0], config.n_range[1] + 1))
    sizes = [int(rng.integers(config.support_range[0], config.support_range[1] + 1)) for _ in range(n)]
    return [tuple(f"s{k}" for k in range(size)) for size in sizes]


def _subadditive_table(
    rng: np.random.Generator, supports: list[tuple[Label, ...]], singles: dict
) -> dict[frozenset, float]:
    """Evaluates min(additive, c·unit-demand) with c drawn from [1, 2] on every typed set."""
    scale = round(float(rng.uniform(1.0, 2.0)), ROUNDING_DIGITS)
    table = {}
    for items in all_subsets(range(len(supports))):
        for labels in np.ndindex(*(len(supports[i]) for i in sorted(items))):
            pairs = frozenset((i, supports[i][k]) for i, k in zip(sorted(items), labels))
            values = [singles[pair] for pair in pairs]
            table[pairs] = round(min(sum(values), scale * max(values)), ROUNDING_DIGITS) if values else 0.0
    return table


def _random_valuation(rng: np.random.Generator, supports: list[tuple[Label, ...]], buyer_class: str) -> SetValuation:
    singles = {(i, lab): _grid_value(rng) for i, labels in enumerate(supports) for lab in labels}
    if buyer_class == "additive":
        return SetValuation(kind=ValuationKind.ADDITIVE, singleton_values=singles)
    if buyer_class == "unit_demand":
        return SetValuation(kind=ValuationKind.UNIT_DEMAND, singleton_values=singles)
    return SetValuation(
        kind=ValuationKind.SUBADDITIVE_TABLE,
        singleton_values={},
        full_table=_subadditive_table(rng, supports, singles),
    )


def generate_instance(
    config: ExperimentConfig,
    seed: int,
    *,
    buyer_class: Optional[str] = None,
    instance_id: Optional[str] = None,
) -> InstanceDocument:
    """Draws a random MRF and a valuation of the requested class.

    Subadditive tables are validated; a table that fails is redrawn up to
    `GENERATOR_MAX_RETRIES` times.

    Args:
        config (ExperimentConfig): Ranges and caps.
        seed (int): The instance seed.
        buyer_class (Optional[str]): Overrides the configured class; "all" is not accepted here.
        instance_id (Optional[str]): Defaults to "instance-<seed>".

    Returns:
        InstanceDocument: The instance.

    Raises:
        ValueError: If the class is unknown.
        MrfMechanismsError: If no valid subadditive table was found.
    """
    buyer_class = buyer_class or buyer_class_for(config, 0)
    if buyer_class not in _CONCRETE_CLASSES:
        raise ValueError(f"buyer_class must be one of {_CONCRETE_CLASSES}, got {buyer_class!r}")
    rng = np.random.default_rng(seed)
    supports = _random_supports(rng, config)
    mrf = _random_mrf(rng, supports, config.potential_cap)
    for attempt in range(GENERATOR_MAX_RETRIES):
        valuation = _random_valuation(rng, supports, buyer_class)
        if valuation.kind is not ValuationKind.SUBADDITIVE_TABLE:
            break
        report = validate_class(valuation, supports)
        if report.passed:
            break
        logger.debug(f"Seed {seed}: subadditive table rejected ({report.violation}), attempt {attempt + 1}.")
    else:
        raise MrfMechanismsError(f"No valid subadditive table for seed {seed} after {GENERATOR_MAX_RETRIES} attempts.")
    return InstanceDocument(instance_id=instance_id or f"instance-{seed}", mrf=mrf, valuation=valuation)


def generate_prophet_instance(config: ExperimentConfig, seed: int) -> ProphetInstance:
    """Draws a random MRF, nonnegative value maps (some zero) and a random arrival order."""
    rng = np.random.default_rng(seed)
    supports = _random_supports(rng, config)
    mrf = _random_mrf(rng, supports, config.potential_cap)
    value_maps = tuple(
        {lab: (0.0 if rng.random() < PROPHET_ZERO_PROBABILITY else _grid_value(rng)) for lab in labels}
        for labels in supports
    )
    order = tuple(int(i) for i in rng.permutation(len(supports)))
    return ProphetInstance(mrf=mrf, value_maps=value_maps, order=order)


def generate_ocrs_instance(config: ExperimentConfig, seed: int) -> OcrsInstance:
    """Draws a binary MRF whose activity probabilities sum to at most 1.

    The active label's vertex potential is shifted down by ln(n) so that the
    budget is usually met; draws that still exceed it are repeated.

    Raises:
        MrfMechanismsError: If no draw met the budget within `GENERATOR_MAX_RETRIES` attempts.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(config.n_range[0], config.n_range[1] + 1))
    supports = [(0, 1)] * n
    shift = round(math.log(n), ROUNDING_DIGITS)
    for _ in range(GENERATOR_MAX_RETRIES):
        mrf = _random_mrf(rng, supports, config.potential_cap)
        mrf = Mrf(
            supports=mrf.supports,
            hyperedges=mrf.hyperedges,
            vertex_potentials=tuple(
                {0: table[0], 1: round(table[1] - shift, ROUNDING_DIGITS)} for table in mrf.vertex_potentials
            ),
            edge_potentials=mrf.edge_potentials,
        )
        x = activity_marginals(mrf)
        if sum(x) <= 1.0:
            order = tuple(int(i) for i in rng.permutation(n))
            return OcrsInstance(mrf=mrf, x=tuple(x), order=order)
    raise MrfMechanismsError(f"No OCRS instance with total activity at most 1 for seed {seed}.")
