"""Set-function valuations over typed items and the distributions they induce.

A buyer's value for a set of items depends on the realized types of the
items in the set: v(S) = g({(i, t_i) : i ∈ S}). `SetValuation` is the
function g, `ValuationDistribution` pairs it with a `JointTable` over the
types and records which items are in play. Tail and core valuations are
expressed as masks of (item, label) pairs that evaluate like the dummy type.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from itertools import combinations, product
from typing import Callable, Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .exceptions import RhoUndefinedError, ValuationTableError
from .mrf import DUMMY_LABEL, JointTable, Label, Outcome, conditional
from .utils import logger_factory, subset_from_mask

logger = logger_factory.get_logger(__name__)

TypedPair = tuple[int, Label]
TypedSet = frozenset[TypedPair]
TailDefinition = Union[Iterable[TypedPair], Callable[[int, Label], bool]]

#: Absolute slack used when validating monotonicity and subadditivity.
CLASS_CHECK_TOL = 1e-12


class ValuationKind(str, Enum):
    """The valuation classes the library knows how to evaluate."""

    ADDITIVE = "additive"
    UNIT_DEMAND = "unit_demand"
    SUBADDITIVE_TABLE = "subadditive_table"


@dataclass(frozen=True, eq=False)
class SetValuation:
    """A monotone set function g over typed items.

    Attributes:
        kind (ValuationKind): How sets are evaluated: by sum, by max, or by table lookup.
        singleton_values (Mapping[TypedPair, float]): g({(i, ω)}) for every item and type.
        full_table (Optional[Mapping[TypedSet, float]]): Every typed set's value; required
            (and only used) for `SUBADDITIVE_TABLE`.
    """

    kind: ValuationKind
    singleton_values: Mapping[TypedPair, float]
    full_table: Optional[Mapping[TypedSet, float]] = None

    def __post_init__(self):
        kind = ValuationKind(self.kind)
        object.__setattr__(self, "kind", kind)
        full_table = None
        if self.full_table is not None:
            full_table = {frozenset(key): float(v) for key, v in self.full_table.items()}
        singles = {tuple(key): float(v) for key, v in self.singleton_values.items()}

        if kind is ValuationKind.SUBADDITIVE_TABLE:
            if full_table is None:
                raise ValueError("A subadditive_table valuation needs a full table.")
            derived = {next(iter(key)): v for key, v in full_table.items() if len(key) == 1}
            if singles and any(abs(singles.get(pair, math.nan) - v) > 0 for pair, v in derived.items()):
                raise ValueError("Singleton values disagree with the full table.")
            singles = derived
            if full_table.get(frozenset(), 0.0) != 0.0:
                raise ValueError("The empty set must be worth 0.")
        elif full_table is not None:
            raise ValueError(f"A {kind.value} valuation is evaluated from singletons and takes no full table.")

        for pair, v in singles.items():
            if pair[1] == DUMMY_LABEL:
                raise ValueError(f"The dummy label cannot carry a value (item {pair[0]}).")
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"Value of {pair!r} must be finite and nonnegative, got {v!r}.")
        if full_table is not None:
            for key, v in full_table.items():
                if not math.isfinite(v) or v < 0:
                    raise ValueError(f"Value of {sorted(key, key=repr)!r} must be finite and nonnegative.")
        object.__setattr__(self, "singleton_values", singles)
        object.__setattr__(self, "full_table", full_table)

    def value(self, typed_set: Iterable[TypedPair]) -> float:
        """Evaluates g on a typed set.

        Dummy entries are dropped before evaluation, so a set of dummies is worth 0.

        Args:
            typed_set (Iterable[TypedPair]): (item, label) pairs, at most one per item.

        Returns:
            float: g of the set.

        Raises:
            ValuationTableError: If an item appears twice or an entry is missing.
        """
        pairs = frozenset((int(i), lab) for i, lab in typed_set if lab != DUMMY_LABEL)
        items = [i for i, _ in pairs]
        if len(items) != len(set(items)):
            raise ValuationTableError(f"Typed set {sorted(pairs, key=repr)!r} holds two types of one item.")
        if not pairs:
            return 0.0
        if self.kind is ValuationKind.SUBADDITIVE_TABLE:
            try:
                return self.full_table[pairs]
            except KeyError:
                raise ValuationTableError(f"No table entry for {sorted(pairs, key=repr)!r}.") from None
        try:
            values = [self.singleton_values[pair] for pair in pairs]
        except KeyError as exc:
            raise ValuationTableError(f"No singleton value for {exc.args[0]!r}.") from None
        return sum(values) if self.kind is ValuationKind.ADDITIVE else max(values)


@dataclass(frozen=True)
class ClassReport:
    """Outcome of an exhaustive monotonicity/subadditivity check.

    Attributes:
        passed (bool): True when no violation was found.
        violation (Optional[str]): Which property failed first.
        witness (tuple): The typed sets exhibiting the violation.
    """

    passed: bool
    violation: Optional[str] = None
    witness: tuple = ()


def value(g: SetValuation, typed_set: Iterable[TypedPair]) -> float:
    """Evaluates `g` on `typed_set`; see `SetValuation.value`."""
    return g.value(typed_set)


def _sorted_pairs(pairs: Iterable[TypedPair]) -> tuple[TypedPair, ...]:
    return tuple(sorted(pairs, key=lambda pair: (pair[0], repr(pair[1]))))


def validate_class(g: SetValuation, supports: Sequence[Sequence[Label]]) -> ClassReport:
    """Exhaustively checks that `g` is a monotone, subadditive valuation with g(∅) = 0.

    Every typed set (each item absent or holding one of its labels) is
    evaluated once. Monotonicity is checked along single-item extensions,
    which covers all nested pairs by transitivity; subadditivity is checked
    on every pair of sets whose union is again a typed set.

    Args:
        g (SetValuation): The valuation.
        supports (Sequence[Sequence[Label]]): The label set of every item.

    Returns:
        ClassReport: The first violation found, if any.
    """
    choices = [[None, *labels] for labels in supports]
    values: dict[tuple, float] = {}
    for assignment in product(*choices):
        pairs = frozenset((i, lab) for i, lab in enumerate(assignment) if lab is not None)
        try:
            values[assignment] = g.value(pairs)
        except ValuationTableError as exc:
            return ClassReport(passed=False, violation=f"missing entry: {exc}", witness=(_sorted_pairs(pairs),))

    empty = tuple(None for _ in supports)
    if values[empty] != 0.0:
        return ClassReport(passed=False, violation="g(empty set) != 0", witness=((),))

    def as_pairs(assignment):
        return _sorted_pairs((i, lab) for i, lab in enumerate(assignment) if lab is not None)

    for assignment, v in values.items():
        for i, lab in enumerate(assignment):
            if lab is not None:
                continue
            for extra in supports[i]:
                bigger = assignment[:i] + (extra,) + assignment[i + 1 :]
                if v > values[bigger] + CLASS_CHECK_TOL:
                    return ClassReport(
                        passed=False, violation="not monotone", witness=(as_pairs(assignment), as_pairs(bigger))
                    )

    keys = list(values)
    for left in keys:
        for right in keys:
            union = []
            for a, b in zip(left, right):
                if a is not None and b is not None and a != b:
                    break
                union.append(a if a is not None else b)
            else:
                union = tuple(union)
                if values[union] > values[left] + values[right] + CLASS_CHECK_TOL:
                    return ClassReport(
                        passed=False,
                        violation="not subadditive",
                        witness=(as_pairs(left), as_pairs(right), as_pairs(union)),
                    )
    return ClassReport(passed=True)


@dataclass(frozen=True, eq=False)
class ValuationDistribution:
    """A random valuation: types drawn from a joint table, values from g.

    Attributes:
        joint (JointTable): The type distribution.
        g (SetValuation): The valuation function.
        item_set (frozenset[int]): Items currently in play; others are worth nothing.
        masked (frozenset[TypedPair]): (item, label) pairs evaluated as the dummy type.
            Tail and core valuations are masks over a common distribution.
    """

    joint: JointTable
    g: SetValuation
    item_set: Optional[frozenset[int]] = None
    masked: frozenset[TypedPair] = frozenset()

    def __post_init__(self):
        item_set = frozenset(range(self.joint.n)) if self.item_set is None else frozenset(self.item_set)
        if not item_set <= frozenset(range(self.joint.n)):
            raise ValueError(f"Item set {sorted(item_set)} is not a subset of 0..{self.joint.n - 1}.")
        object.__setattr__(self, "item_set", item_set)
        object.__setattr__(self, "masked", frozenset(self.masked))

    @property
    def n(self) -> int:
        """The number of items (coordinates of the joint), in play or not."""
        return self.joint.n

    @property
    def items(self) -> tuple[int, ...]:
        """The items in play, sorted; bitmasks over subsets refer to this order."""
        return tuple(sorted(self.item_set))

    def typed_set(self, outcome: Outcome, items: Optional[Iterable[int]] = None) -> TypedSet:
        selected = self.item_set if items is None else self.item_set & frozenset(items)
        return frozenset(
            (i, outcome[i])
            for i in selected
            if outcome[i] != DUMMY_LABEL and (i, outcome[i]) not in self.masked
        )

    def value(self, outcome: Outcome, items: Optional[Iterable[int]] = None) -> float:
        """Returns v_s(S) for the realized types `outcome` and the items `items` (default: all in play)."""
        return self.g.value(self.typed_set(outcome, items))

    @cached_property
    def support(self) -> tuple[tuple[Outcome, float], ...]:
        """Positive-probability outcomes and their probabilities, in table order."""
        return tuple(self.joint.positive_items())

    @cached_property
    def probabilities(self) -> np.ndarray:
        return np.array([p for _, p in self.support], dtype=float)

    @cached_property
    def subset_values(self) -> np.ndarray:
        """v_s(S) for every positive outcome (rows) and subset bitmask over `items` (columns)."""
        items = self.items
        table = np.zeros((len(self.support), 2 ** len(items)), dtype=float)
        for row, (outcome, _) in enumerate(self.support):
            for mask in range(1, 2 ** len(items)):
                table[row, mask] = self.value(outcome, subset_from_mask(items, mask))
        return table

    @cached_property
    def singleton_matrix(self) -> np.ndarray:
        """v_s({i}) for every positive outcome (rows) and item of `items` (columns)."""
        return self.subset_values[:, [1 << k for k in range(len(self.items))]]


def restrict(D: ValuationDistribution, S: Iterable[int]) -> ValuationDistribution:
    """Returns D^S: the same joint, with only the items of `S` in play.

    Raises:
        ValueError: If `S` is not a subset of the items in play.
    """
    subset = frozenset(S)
    if not subset <= D.item_set:
        raise ValueError(f"Cannot restrict to {sorted(subset)}: items in play are {sorted(D.item_set)}.")
    return replace(D, item_set=subset)


def val(D: ValuationDistribution) -> float:
    """Returns Val(D) = E[v(item_set)]."""
    if not D.item_set or not D.support:
        return 0.0
    return float(D.probabilities @ D.subset_values[:, -1])


def tail_pairs(D: ValuationDistribution, tail_def: TailDefinition) -> frozenset[TypedPair]:
    """Normalizes a tail definition into the set of (item, label) pairs it marks as tail."""
    if callable(tail_def):
        return frozenset(
            (i, lab) for i in D.items for lab in D.joint.supports[i] if lab != DUMMY_LABEL and tail_def(i, lab)
        )
    return frozenset((int(i), lab) for i, lab in tail_def)


def threshold_tail(D: ValuationDistribution, cutoff: float) -> frozenset[TypedPair]:
    """Marks (i, ω) as tail whenever the stand-alone value g({(i, ω)}) reaches `cutoff`."""
    return tail_pairs(D, lambda i, lab: D.g.value({(i, lab)}) >= cutoff)


def _tail_indicators(D: ValuationDistribution, pairs: frozenset[TypedPair]) -> dict[int, np.ndarray]:
    return {
        i: D.joint.coordinate_array(i, [float((i, lab) in pairs) for lab in D.joint.supports[i]]).astype(bool)
        for i in D.items
    }


def _tail_event(D: ValuationDistribution, indicators: dict[int, np.ndarray], A: frozenset[int]) -> np.ndarray:
    mask = np.ones(D.joint.shape, dtype=bool)
    for i, in_tail in indicators.items():
        mask = mask & (in_tail if i in A else ~in_tail)
    return mask


def tail_event_probabilities(D: ValuationDistribution, tail_def: TailDefinition) -> dict[frozenset[int], float]:
    """Returns Pr[T = A] for every feasible A, ordered by size then members.

    T is the random set of items in play whose realized type is a tail pair.
    """
    indicators = _tail_indicators(D, tail_pairs(D, tail_def))
    result = {}
    for size in range(len(D.items) + 1):
        for members in combinations(D.items, size):
            A = frozenset(members)
            mass = float(D.joint.prob[_tail_event(D, indicators, A)].sum())
            if mass > 0:
                result[A] = mass
    return result


def condition_on_tail(D: ValuationDistribution, tail_def: TailDefinition, A: Iterable[int]) -> ValuationDistribution:
    """Returns D_A: the joint conditioned on the event T = A.

    Raises:
        ZeroProbabilityEventError: If T = A has probability zero.
    """
    A = frozenset(A)
    if not A <= D.item_set:
        raise ValueError(f"Tail set {sorted(A)} is not a subset of the items in play.")
    event = _tail_event(D, _tail_indicators(D, tail_pairs(D, tail_def)), A)
    return replace(D, joint=conditional(D.joint, event))


def tail_component(D: ValuationDistribution, tail_def: TailDefinition) -> ValuationDistribution:
    """Returns D^T: items count only while their realized type is in the tail."""
    pairs = tail_pairs(D, tail_def)
    others = frozenset((i, lab) for i in D.items for lab in D.joint.supports[i] if (i, lab) not in pairs)
    return replace(D, masked=D.masked | others)


def core_component(D: ValuationDistribution, tail_def: TailDefinition) -> ValuationDistribution:
    """Returns D^C: items count only while their realized type is outside the tail."""
    return replace(D, masked=D.masked | tail_pairs(D, tail_def))


@dataclass(frozen=True)
class RhoReport:
    """The ρ statistic with its bookkeeping.

    Attributes:
        value (float): max over j and outcomes of g({s_i : i ≠ j}) / max_{i≠j} g({s_i}).
        skipped (int): (outcome, j) pairs dropped for a zero denominator.
        witness (tuple): The outcome and j attaining the maximum.
    """

    value: float
    skipped: int
    witness: tuple


def rho_report(D: ValuationDistribution) -> RhoReport:
    """Computes ρ and reports the pairs that had to be skipped.

    Raises:
        ValueError: If fewer than two items are in play.
        RhoUndefinedError: If every denominator is zero.
    """
    items = D.items
    if len(items) < 2:
        raise ValueError("rho needs at least two items in play.")
    best: Optional[tuple[float, tuple]] = None
    skipped = 0
    for outcome, _ in D.support:
        singles = {i: D.value(outcome, (i,)) for i in items}
        for j in items:
            denominator = max(singles[i] for i in items if i != j)
            if denominator <= 0:
                skipped += 1
                continue
            ratio = D.value(outcome, [i for i in items if i != j]) / denominator
            if best is None or ratio > best[0]:
                best = (ratio, (outcome, j))
    if best is None:
        raise RhoUndefinedError("Every outcome has a zero rho denominator.")
    if skipped:
        logger.warning(f"rho skipped {skipped} (outcome, item) pairs with a zero denominator.")
    return RhoReport(value=best[0], skipped=skipped, witness=best[1])


def rho(D: ValuationDistribution) -> float:
    """Returns the ρ statistic; see `rho_report`."""
    return rho_report(D).value
