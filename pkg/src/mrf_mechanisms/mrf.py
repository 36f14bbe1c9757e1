"""Finite-support Markov Random Fields and exact inference over them.

An `Mrf` is a hypergraph over `n` typed vertices with vertex and hyperedge
potentials; its probability function is proportional to the exponential of
the summed potentials. Everything downstream works on the exact
`JointTable`, a normalized `numpy` array with one axis per vertex, except
for long path MRFs which are handled through their forward Markov chain
(`path_chain`).
"""

import math
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .config import (
    DEFAULT_SUPPORT_CAP,
    EXHAUSTIVE_SUBSET_LIMIT,
    NORMALIZATION_TOL,
    RELATIVE_TOL,
    SUBSET_SAMPLE_SIZE,
)
from .exceptions import SupportSizeError, ZeroProbabilityEventError
from .utils import logger_factory

logger = logger_factory.get_logger(__name__)

Label = Union[str, int]
Outcome = tuple[Label, ...]

#: Sentinel type used by the independent envelope; it is worth nothing to every valuation.
DUMMY_LABEL = "⊥"


def _expand(table: np.ndarray, members: Sequence[int], positions: Mapping[int, int], ndim: int) -> np.ndarray:
    """Reshapes a table over `members` so it broadcasts against an `ndim`-axis array.

    `positions` maps each member vertex to the axis it occupies in the target array.
    """
    axes = [positions[m] for m in members]
    order = np.argsort(axes)
    moved = np.transpose(table, order)
    shape = [1] * ndim
    for k, axis in enumerate(sorted(axes)):
        shape[axis] = moved.shape[k]
    return moved.reshape(shape)


@dataclass(frozen=True, eq=False)
class Mrf:
    """A Markov Random Field over finite label sets.

    Attributes:
        supports (tuple[tuple[Label, ...], ...]): The label set Ω_i of every vertex.
        hyperedges (tuple[tuple[int, ...], ...]): Vertex tuples, each of size at least 2.
        vertex_potentials (tuple[Mapping[Label, float], ...]): ψ_i per vertex; an empty
            tuple means all vertex potentials are zero.
        edge_potentials (tuple[Mapping[tuple[Label, ...], float], ...]): ψ_e per hyperedge,
            keyed by label tuples ordered like the hyperedge's members.
    """

    supports: tuple[tuple[Label, ...], ...]
    hyperedges: tuple[tuple[int, ...], ...] = ()
    vertex_potentials: tuple[Mapping[Label, float], ...] = ()
    edge_potentials: tuple[Mapping[tuple[Label, ...], float], ...] = ()
    _label_index: tuple[dict[Label, int], ...] = field(init=False, repr=False)

    def __post_init__(self):
        supports = tuple(tuple(labels) for labels in self.supports)
        if not supports:
            raise ValueError("An MRF needs at least one vertex.")
        for i, labels in enumerate(supports):
            if not labels:
                raise ValueError(f"Vertex {i} has an empty support.")
            if len(set(labels)) != len(labels):
                raise ValueError(f"Vertex {i} has repeated labels: {labels!r}")
            if DUMMY_LABEL in labels:
                raise ValueError(f"Vertex {i} uses the reserved dummy label {DUMMY_LABEL!r}.")
        object.__setattr__(self, "supports", supports)
        object.__setattr__(self, "_label_index", tuple({lab: k for k, lab in enumerate(s)} for s in supports))

        hyperedges = tuple(tuple(int(m) for m in edge) for edge in self.hyperedges)
        for edge in hyperedges:
            if len(edge) < 2 or len(set(edge)) != len(edge):
                raise ValueError(f"Hyperedge {edge!r} must have at least two distinct members.")
            if any(m < 0 or m >= len(supports) for m in edge):
                raise ValueError(f"Hyperedge {edge!r} references a vertex outside 0..{len(supports) - 1}.")
        object.__setattr__(self, "hyperedges", hyperedges)

        vertex_potentials = tuple(dict(p) for p in self.vertex_potentials)
        if not vertex_potentials:
            vertex_potentials = tuple({lab: 0.0 for lab in labels} for labels in supports)
        if len(vertex_potentials) != len(supports):
            raise ValueError(
                f"Expected {len(supports)} vertex potential tables, got {len(vertex_potentials)}."
            )
        for i, table in enumerate(vertex_potentials):
            self._check_table(f"vertex {i}", table, [(lab,) for lab in supports[i]], key_is_tuple=False)
        object.__setattr__(self, "vertex_potentials", vertex_potentials)

        edge_potentials = tuple({tuple(k): v for k, v in p.items()} for p in self.edge_potentials)
        if len(edge_potentials) != len(hyperedges):
            raise ValueError(
                f"Expected {len(hyperedges)} hyperedge potential tables, got {len(edge_potentials)}."
            )
        for edge, table in zip(hyperedges, edge_potentials):
            domain = list(product(*(supports[m] for m in edge)))
            self._check_table(f"hyperedge {edge}", table, domain, key_is_tuple=True)
        object.__setattr__(self, "edge_potentials", edge_potentials)

    @staticmethod
    def _check_table(name: str, table: Mapping, domain: list[tuple], key_is_tuple: bool):
        keys = set(domain) if key_is_tuple else {key[0] for key in domain}
        if set(table) != keys:
            missing = keys - set(table)
            extra = set(table) - keys
            raise ValueError(f"Potential table of {name} is not total: missing {missing!r}, unexpected {extra!r}.")
        for key, value in table.items():
            if not math.isfinite(value):
                raise ValueError(f"Potential table of {name} has a non-finite value at {key!r}.")

    @property
    def n(self) -> int:
        """The number of vertices."""
        return len(self.supports)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.supports)

    def label_index(self, i: int, label: Label) -> int:
        """Returns the position of `label` inside Ω_i."""
        return self._label_index[i][label]

    def vertex_potential_array(self, i: int) -> np.ndarray:
        return np.array([self.vertex_potentials[i][lab] for lab in self.supports[i]], dtype=float)

    def edge_potential_array(self, k: int) -> np.ndarray:
        """Returns ψ_e of the `k`-th hyperedge as an array with one axis per member, in member order."""
        edge = self.hyperedges[k]
        table = self.edge_potentials[k]
        arr = np.empty(tuple(len(self.supports[m]) for m in edge), dtype=float)
        for idx in product(*(range(len(self.supports[m])) for m in edge)):
            arr[idx] = table[tuple(self.supports[m][j] for m, j in zip(edge, idx))]
        return arr

    def incident_edges(self, i: int) -> list[int]:
        return [k for k, edge in enumerate(self.hyperedges) if i in edge]

    def log_weight_array(self) -> np.ndarray:
        """Returns Σ_i ψ_i(s_i) + Σ_e ψ_e(s_e) for every outcome, as an array of `shape`."""
        positions = {i: i for i in range(self.n)}
        logw = np.zeros(self.shape, dtype=float)
        for i in range(self.n):
            logw = logw + _expand(self.vertex_potential_array(i), (i,), positions, self.n)
        for k, edge in enumerate(self.hyperedges):
            logw = logw + _expand(self.edge_potential_array(k), edge, positions, self.n)
        return logw

    def permuted(self, order: Sequence[int]) -> "Mrf":
        """Relabels vertices so that new vertex `j` is old vertex `order[j]`.

        Args:
            order (Sequence[int]): A permutation of `0..n-1`.

        Raises:
            ValueError: If `order` is not a permutation.
        """
        if sorted(order) != list(range(self.n)):
            raise ValueError(f"{order!r} is not a permutation of 0..{self.n - 1}")
        inverse = {old: new for new, old in enumerate(order)}
        return Mrf(
            supports=tuple(self.supports[old] for old in order),
            hyperedges=tuple(tuple(inverse[m] for m in edge) for edge in self.hyperedges),
            vertex_potentials=tuple(self.vertex_potentials[old] for old in order),
            edge_potentials=self.edge_potentials,
        )


@dataclass(frozen=True, eq=False)
class JointTable:
    """The exact, normalized probability table of a finite joint distribution.

    Attributes:
        supports (tuple[tuple[Label, ...], ...]): The label set of every coordinate.
        prob (np.ndarray): Read-only array of shape `(|Ω_1|, ..., |Ω_n|)`.
    """

    supports: tuple[tuple[Label, ...], ...]
    prob: np.ndarray

    def __post_init__(self):
        supports = tuple(tuple(labels) for labels in self.supports)
        prob = np.array(self.prob, dtype=float)
        expected = tuple(len(s) for s in supports)
        if prob.shape != expected:
            raise ValueError(f"Probability array has shape {prob.shape}, expected {expected}.")
        if np.any(prob < 0):
            raise ValueError(f"Probabilities must be nonnegative (min {prob.min()!r}).")
        total = float(prob.sum())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"Probabilities sum to {total!r}, not 1.")
        prob.setflags(write=False)
        object.__setattr__(self, "supports", supports)
        object.__setattr__(self, "prob", prob)

    @property
    def n(self) -> int:
        return len(self.supports)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.prob.shape

    def label_index(self, i: int, label: Label) -> int:
        return self.supports[i].index(label)

    def outcomes(self) -> Iterator[Outcome]:
        """Yields every outcome of the product support in C order."""
        return product(*self.supports)

    def items(self) -> Iterator[tuple[Outcome, float]]:
        """Yields `(outcome, probability)` pairs, zero-probability outcomes included."""
        return zip(self.outcomes(), self.prob.ravel().tolist())

    def positive_items(self) -> Iterator[tuple[Outcome, float]]:
        return ((s, p) for s, p in self.items() if p > 0)

    def probability(self, outcome: Outcome) -> float:
        idx = tuple(self.label_index(i, lab) for i, lab in enumerate(outcome))
        return float(self.prob[idx])

    def coordinate_array(self, i: int, values: Sequence[float]) -> np.ndarray:
        """Returns `values` (one per label of Ω_i) shaped to broadcast along axis `i`."""
        shape = [1] * self.n
        shape[i] = len(self.supports[i])
        return np.asarray(values, dtype=float).reshape(shape)


@dataclass(frozen=True)
class DeltaReport:
    """The maximum weighted degree of an MRF and where it is attained.

    Attributes:
        delta (float): max_i max_s |Σ_{e∋i} ψ_e(s_e)|.
        witness_vertex (int): A vertex attaining the maximum.
        witness_outcome (Outcome): A full outcome attaining the maximum.
    """

    delta: float
    witness_vertex: int
    witness_outcome: Outcome


@dataclass(frozen=True)
class ConditioningReport:
    """Result of checking the conditioning-ratio bound on a joint table.

    Attributes:
        max_ratio (float): Largest Pr[E_i ∧ E_-i] / (Pr[E_i]·Pr[E_-i]) found.
        min_ratio (float): Smallest such ratio found.
        delta (float): The degree bound the ratios were compared against.
        passed (bool): Whether every ratio lies in [e^{-4δ}, e^{4δ}] up to `RELATIVE_TOL`.
        checked_pairs (int): Number of event pairs with positive probabilities.
        sampled (bool): True when at least one complement was sampled instead of enumerated.
    """

    max_ratio: float
    min_ratio: float
    delta: float
    passed: bool
    checked_pairs: int
    sampled: bool


@dataclass(frozen=True)
class AnchoredConditional:
    """A requested conditional law for one vertex of a path MRF.

    Attributes:
        anchor (Optional[Label]): The predecessor state the target is conditioned on;
            None for the first vertex, whose target is its marginal.
        target (Mapping[Label, float]): The requested distribution, strictly inside (0, 1).
    """

    anchor: Optional[Label]
    target: Mapping[Label, float]


@dataclass(frozen=True, eq=False)
class PathChain:
    """The forward Markov chain of a path MRF.

    Attributes:
        supports (tuple[tuple[Label, ...], ...]): The label sets along the path.
        initial (np.ndarray): Distribution of the first vertex.
        transitions (tuple[np.ndarray, ...]): `transitions[i-1][a, b]` is
            Pr(t_i = b | t_{i-1} = a) for `i = 1..n-1`.
    """

    supports: tuple[tuple[Label, ...], ...]
    initial: np.ndarray
    transitions: tuple[np.ndarray, ...]

    @property
    def n(self) -> int:
        return len(self.supports)

    def marginals(self) -> list[np.ndarray]:
        """Returns the marginal distribution of every vertex by forward propagation."""
        current = self.initial
        result = [current]
        for matrix in self.transitions:
            current = current @ matrix
            result.append(current)
        return result

    def transition(self, i: int) -> np.ndarray:
        """Returns Pr(t_i | t_{i-1}) as a matrix; `i` must be at least 1."""
        return self.transitions[i - 1]


def max_weighted_degree(mrf: Mrf) -> DeltaReport:
    """Computes the maximum weighted degree Δ of an MRF.

    Only the labels of a vertex's hyperedge neighbourhood influence its
    incident sum, so each vertex is scanned over that neighbourhood rather
    than over the full product support.

    Args:
        mrf (Mrf): The field to inspect.

    Returns:
        DeltaReport: Δ together with a vertex and full outcome realizing it.
    """
    best = DeltaReport(delta=0.0, witness_vertex=0, witness_outcome=tuple(s[0] for s in mrf.supports))
    for i in range(mrf.n):
        incident = mrf.incident_edges(i)
        if not incident:
            continue
        neighbourhood = sorted({m for k in incident for m in mrf.hyperedges[k]})
        positions = {v: axis for axis, v in enumerate(neighbourhood)}
        local = np.zeros(tuple(len(mrf.supports[v]) for v in neighbourhood), dtype=float)
        for k in incident:
            local = local + _expand(mrf.edge_potential_array(k), mrf.hyperedges[k], positions, len(neighbourhood))
        magnitude = np.abs(local)
        flat = int(np.argmax(magnitude))
        value = float(magnitude.flat[flat])
        if value > best.delta:
            local_idx = np.unravel_index(flat, magnitude.shape)
            outcome = [s[0] for s in mrf.supports]
            for v, j in zip(neighbourhood, local_idx):
                outcome[v] = mrf.supports[v][int(j)]
            best = DeltaReport(delta=value, witness_vertex=i, witness_outcome=tuple(outcome))
    return best


def joint_table(mrf: Mrf, *, max_support_size: int = DEFAULT_SUPPORT_CAP) -> JointTable:
    """Computes the exact joint distribution of an MRF.

    Weights are accumulated in the log domain and normalized with a
    max-shifted log-sum-exp, so large potentials never overflow.

    Args:
        mrf (Mrf): The field.
        max_support_size (int): Largest product support allowed.

    Returns:
        JointTable: The normalized table.

    Raises:
        SupportSizeError: If the product support exceeds `max_support_size`.
    """
    size = math.prod(mrf.shape)
    if size > max_support_size:
        raise SupportSizeError("Product support", size, max_support_size)
    logw = mrf.log_weight_array()
    prob = np.exp(logw - logsumexp(logw))
    prob /= prob.sum()
    logger.debug(f"Built joint table over {size} outcomes for {mrf.n} vertices.")
    return JointTable(supports=mrf.supports, prob=prob)


def marginal(joint: JointTable, i: int) -> dict[Label, float]:
    """Returns the exact marginal distribution of coordinate `i`.

    Raises:
        ValueError: If `i` is not a coordinate of the table.
    """
    if not 0 <= i < joint.n:
        raise ValueError(f"Index {i} is outside 0..{joint.n - 1}.")
    others = tuple(axis for axis in range(joint.n) if axis != i)
    values = joint.prob.sum(axis=others) if others else joint.prob
    return {lab: float(p) for lab, p in zip(joint.supports[i], values)}


def event_mask(joint: JointTable, event: Union[Callable[[Outcome], bool], np.ndarray]) -> np.ndarray:
    """Evaluates an event, given as a predicate or a boolean array, over every outcome."""
    if isinstance(event, np.ndarray):
        if event.shape != joint.shape:
            raise ValueError(f"Event mask has shape {event.shape}, expected {joint.shape}.")
        return event.astype(bool)
    flags = np.fromiter((bool(event(s)) for s in joint.outcomes()), dtype=bool, count=joint.prob.size)
    return flags.reshape(joint.shape)


def conditional(joint: JointTable, event: Union[Callable[[Outcome], bool], np.ndarray]) -> JointTable:
    """Restricts a joint table to an event and renormalizes.

    Args:
        joint (JointTable): The unconditional table.
        event (Callable[[Outcome], bool] | np.ndarray): A predicate over outcomes or
            a boolean array of the table's shape.

    Returns:
        JointTable: The conditional table; outcomes outside the event get probability 0.

    Raises:
        ZeroProbabilityEventError: If the event has probability zero.
    """
    mask = event_mask(joint, event)
    restricted = np.where(mask, joint.prob, 0.0)
    mass = float(restricted.sum())
    if mass <= 0.0:
        raise ZeroProbabilityEventError("Cannot condition on an event of probability zero.")
    return JointTable(supports=joint.supports, prob=restricted / mass)


def _nonempty_subset_indicators(size: int) -> np.ndarray:
    masks = np.arange(1, 2**size, dtype=np.int64)
    return ((masks[:, None] >> np.arange(size)) & 1).astype(float)


def check_conditioning_bounds(
    joint: JointTable,
    delta: float,
    *,
    exhaustive_limit: int = EXHAUSTIVE_SUBSET_LIMIT,
    sample_size: int = SUBSET_SAMPLE_SIZE,
    seed: int = 0,
) -> ConditioningReport:
    """Checks that every event pair E_i, E_-i has a ratio within [e^{-4δ}, e^{4δ}].

    For each coordinate `i` the table is folded into a matrix with one row per
    label of Ω_i and one column per outcome of the other coordinates. Event
    probabilities then come from indicator products: all nonempty subsets on
    the row side, and either all nonempty subsets or `sample_size` random ones
    on the column side.

    Args:
        joint (JointTable): A table produced by an MRF whose maximum weighted degree is at most `delta`.
        delta (float): The degree bound.
        exhaustive_limit (int): Column counts up to this are enumerated exhaustively.
        sample_size (int): Number of random column subsets otherwise.
        seed (int): Seed for the subset sampler.

    Returns:
        ConditioningReport: Extreme ratios and the verdict.
    """
    rng = np.random.default_rng(seed)
    max_ratio, min_ratio = 1.0, 1.0
    checked = 0
    sampled = False
    for i in range(joint.n):
        folded = np.moveaxis(joint.prob, i, 0).reshape(len(joint.supports[i]), -1)
        rows, cols = folded.shape
        if rows <= exhaustive_limit:
            row_sets = _nonempty_subset_indicators(rows)
        else:
            row_sets = (rng.random((sample_size, rows)) < 0.5).astype(float)
            sampled = True
        if cols <= exhaustive_limit:
            col_sets = _nonempty_subset_indicators(cols)
        else:
            col_sets = (rng.random((sample_size, cols)) < 0.5).astype(float)
            sampled = True

        both = row_sets @ folded @ col_sets.T
        p_rows = row_sets @ folded.sum(axis=1)
        p_cols = col_sets @ folded.sum(axis=0)
        valid = (p_rows[:, None] > 0) & (p_cols[None, :] > 0)
        if not valid.any():
            continue
        ratios = both[valid] / np.outer(p_rows, p_cols)[valid]
        checked += int(valid.sum())
        max_ratio = max(max_ratio, float(ratios.max()))
        min_ratio = min(min_ratio, float(ratios.min()))

    upper = math.exp(4 * delta) * (1 + RELATIVE_TOL)
    lower = math.exp(-4 * delta) * (1 - RELATIVE_TOL)
    passed = max_ratio <= upper and min_ratio >= lower
    logger.debug(f"Conditioning ratios in [{min_ratio:.6g}, {max_ratio:.6g}] over {checked} pairs (delta={delta}).")
    return ConditioningReport(
        max_ratio=max_ratio,
        min_ratio=min_ratio,
        delta=delta,
        passed=passed,
        checked_pairs=checked,
        sampled=sampled,
    )


def _path_edge_matrices(mrf: Mrf) -> list[np.ndarray]:
    """Returns E_i[a, b] = ψ_{i-1,i}(a, b) for i = 1..n-1, summing parallel edges.

    Raises:
        ValueError: If the hyperedges are not exactly the consecutive pairs.
    """
    matrices = [np.zeros((len(mrf.supports[i - 1]), len(mrf.supports[i]))) for i in range(1, mrf.n)]
    seen = set()
    for k, edge in enumerate(mrf.hyperedges):
        low, high = min(edge), max(edge)
        if len(edge) != 2 or high != low + 1:
            raise ValueError(f"Hyperedge {edge!r} is not a consecutive pair; the MRF is not a path.")
        table = mrf.edge_potential_array(k)
        matrices[low] = matrices[low] + (table if edge[0] == low else table.T)
        seen.add(low)
    if seen != set(range(mrf.n - 1)):
        raise ValueError("A path MRF needs an edge between every consecutive pair of vertices.")
    return matrices


def build_path_mrf(
    supports: Sequence[Sequence[Label]],
    edge_potentials: Sequence[Mapping[tuple[Label, Label], float]],
    anchored_conditionals: Sequence[Optional[AnchoredConditional]],
) -> Mrf:
    """Builds a path MRF whose vertex potentials realize anchored conditionals.

    Vertex potentials are chosen from the last vertex backwards. With β_i the
    backward message (the partition weight of the path downstream of `i`),
    setting ψ_i(ω) = log p_ω − E_i(anchor, ω) − log β_i(ω) makes
    Pr(t_i = ω | t_{i-1} = anchor) = p_ω. A `None` entry leaves ψ_i at zero.

    Args:
        supports (Sequence[Sequence[Label]]): Label sets along the path.
        edge_potentials (Sequence[Mapping]): ψ for each pair (i-1, i), keyed by (a, b).
        anchored_conditionals (Sequence[Optional[AnchoredConditional]]): One entry per vertex.

    Returns:
        Mrf: The path field.

    Raises:
        ValueError: On length mismatches, unknown anchors or a target outside (0, 1).
    """
    n = len(supports)
    if len(edge_potentials) != n - 1:
        raise ValueError(f"A path over {n} vertices needs {n - 1} edge tables, got {len(edge_potentials)}.")
    if len(anchored_conditionals) != n:
        raise ValueError(f"Expected {n} anchored conditionals, got {len(anchored_conditionals)}.")
    skeleton = Mrf(
        supports=tuple(tuple(s) for s in supports),
        hyperedges=tuple((i - 1, i) for i in range(1, n)),
        edge_potentials=tuple(edge_potentials),
    )
    edges = _path_edge_matrices(skeleton)

    psi = [np.zeros(len(s)) for s in skeleton.supports]
    log_beta = np.zeros(len(skeleton.supports[-1]))
    for i in range(n - 1, -1, -1):
        anchored = anchored_conditionals[i]
        if anchored is not None:
            labels = skeleton.supports[i]
            if set(anchored.target) != set(labels):
                raise ValueError(f"Target of vertex {i} must cover exactly {labels!r}.")
            target = np.array([anchored.target[lab] for lab in labels], dtype=float)
            if np.any(target <= 0) or np.any(target >= 1):
                raise ValueError(f"Target of vertex {i} must lie strictly inside (0, 1): {dict(anchored.target)!r}")
            if abs(target.sum() - 1.0) > NORMALIZATION_TOL:
                raise ValueError(f"Target of vertex {i} sums to {target.sum()!r}, not 1.")
            if i == 0:
                if anchored.anchor is not None:
                    raise ValueError("The first vertex has no predecessor to anchor on.")
                base = log_beta
            else:
                if anchored.anchor not in skeleton.supports[i - 1]:
                    raise ValueError(f"Anchor {anchored.anchor!r} of vertex {i} is not a label of vertex {i - 1}.")
                base = edges[i - 1][skeleton.label_index(i - 1, anchored.anchor)] + log_beta
            psi[i] = np.log(target) - base
        if i > 0:
            log_beta = logsumexp(edges[i - 1] + (psi[i] + log_beta)[None, :], axis=1)

    return Mrf(
        supports=skeleton.supports,
        hyperedges=skeleton.hyperedges,
        vertex_potentials=tuple(
            {lab: float(v) for lab, v in zip(labels, psi_i)} for labels, psi_i in zip(skeleton.supports, psi)
        ),
        edge_potentials=skeleton.edge_potentials,
    )


def path_chain(mrf: Mrf) -> PathChain:
    """Converts a path MRF into its forward Markov chain.

    Backward messages are computed in the log domain, so paths of any length
    are handled without building the joint table.

    Raises:
        ValueError: If the hyperedges are not exactly the consecutive pairs.
    """
    edges = _path_edge_matrices(mrf)
    psi = [mrf.vertex_potential_array(i) for i in range(mrf.n)]
    log_beta = [np.zeros(0)] * mrf.n
    log_beta[-1] = np.zeros(len(mrf.supports[-1]))
    for i in range(mrf.n - 1, 0, -1):
        log_beta[i - 1] = logsumexp(edges[i - 1] + (psi[i] + log_beta[i])[None, :], axis=1)

    start = psi[0] + log_beta[0]
    initial = np.exp(start - logsumexp(start))
    initial /= initial.sum()
    transitions = []
    for i in range(1, mrf.n):
        logits = edges[i - 1] + (psi[i] + log_beta[i])[None, :] - log_beta[i - 1][:, None]
        matrix = np.exp(logits)
        transitions.append(matrix / matrix.sum(axis=1, keepdims=True))
    return PathChain(supports=mrf.supports, initial=initial, transitions=tuple(transitions))


def independent_envelope(joint: JointTable) -> JointTable:
    """Builds the independent lower envelope t^ind of a joint distribution.

    Coordinate `i` of the envelope puts on every label ω the smallest
    conditional probability Pr(t_i = ω | t_-i = ω_-i) over positive-probability
    contexts ω_-i, and the leftover mass on `DUMMY_LABEL`. Coordinates are
    independent.

    Returns:
        JointTable: A product table over Ω_i ∪ {⊥}.
    """
    coordinates = []
    for i in range(joint.n):
        folded = np.moveaxis(joint.prob, i, 0).reshape(len(joint.supports[i]), -1)
        context = folded.sum(axis=0)
        positive = context > 0
        lowest = (folded[:, positive] / context[positive]).min(axis=1)
        dummy = max(0.0, 1.0 - float(lowest.sum()))
        coordinates.append(np.append(lowest, dummy))

    prob = coordinates[0]
    for vector in coordinates[1:]:
        prob = np.multiply.outer(prob, vector)
    prob = prob / prob.sum()
    return JointTable(supports=tuple(s + (DUMMY_LABEL,) for s in joint.supports), prob=prob)


def sample_many(joint: JointTable, size: int, seed: int) -> np.ndarray:
    """Draws `size` flat outcome indices by inverse-CDF sampling."""
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(joint.prob.ravel())
    draws = rng.random(size) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, draws, side="right"), cdf.size - 1)


def sample(mrf: Mrf, seed: int) -> Outcome:
    """Draws one exact sample from an MRF; deterministic for a given seed."""
    joint = joint_table(mrf)
    flat = int(sample_many(joint, 1, seed)[0])
    idx = np.unravel_index(flat, joint.shape)
    return tuple(joint.supports[i][int(j)] for i, j in enumerate(idx))
