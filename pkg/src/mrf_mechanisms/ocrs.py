"""Online contention resolution for a single item under MRF-correlated activity.

Elements arrive in order and are active when their vertex takes the active
label. A scheme sees each active element once and may select it if nothing
has been selected yet. Every probability here is computed exactly, by a
forward pass over the joint table or, on a path MRF in path order, over the
path's Markov chain.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple, Optional

import numpy as np

from .config import NORMALIZATION_TOL, SCHEME_TOL
from .exceptions import SchemeInfeasibleError
from .lp import DenseSimplexSolver, LpProblem, LpSolution, lp_solve
from .models import BoundReport, equality_report
from .mrf import (
    AnchoredConditional,
    JointTable,
    Label,
    Mrf,
    PathChain,
    build_path_mrf,
    joint_table,
    max_weighted_degree,
    path_chain,
)
from .utils import logger_factory

logger = logger_factory.get_logger(__name__)

#: Label marking an element as active.
ACTIVE_LABEL = 1

#: Tolerance on Σ_i x_i ≤ 1 and on x_i matching the exact marginals.
MARGINAL_TOL = 1e-12

#: Slack granted when comparing a searched scheme against the analytic optimum.
SEARCH_TOL = 1e-9


def activity_marginals(mrf: Mrf, active_label: Label = ACTIVE_LABEL) -> list[float]:
    """Returns the exact Pr[t_i = active_label] for every vertex.

    Path MRFs are handled through their Markov chain; anything else goes
    through the joint table.
    """
    try:
        chain = path_chain(mrf)
    except ValueError:
        joint = joint_table(mrf)
        return [
            float((joint.prob * joint.coordinate_array(i, [float(lab == active_label) for lab in labels])).sum())
            for i, labels in enumerate(mrf.supports)
        ]
    return [
        float(m @ np.array([float(lab == active_label) for lab in labels]))
        for m, labels in zip(chain.marginals(), mrf.supports)
    ]


@dataclass(frozen=True, eq=False)
class OcrsInstance:
    """A rank-one OCRS problem.

    Attributes:
        mrf (Mrf): The activity distribution; every support holds at most two labels.
        x (tuple[float, ...]): x_i = Pr[element i active], one per vertex.
        order (Optional[tuple[int, ...]]): Arrival order; None means 0, 1, ..., n-1.
        active_label (Label): The label meaning "active".
        delta_nominal (Optional[float]): The edge magnitude a generator was asked for, if any.
    """

    mrf: Mrf
    x: tuple[float, ...]
    order: Optional[tuple[int, ...]] = None
    active_label: Label = ACTIVE_LABEL
    delta_nominal: Optional[float] = None

    def __post_init__(self):
        for i, labels in enumerate(self.mrf.supports):
            if len(labels) > 2:
                raise ValueError(f"Vertex {i} has {len(labels)} labels; OCRS elements are binary.")
        order = tuple(range(self.mrf.n)) if self.order is None else tuple(int(i) for i in self.order)
        if sorted(order) != list(range(self.mrf.n)):
            raise ValueError(f"{order!r} is not a permutation of 0..{self.mrf.n - 1}")
        object.__setattr__(self, "order", order)

        x = tuple(float(v) for v in self.x)
        if len(x) != self.mrf.n:
            raise ValueError(f"Expected {self.mrf.n} activity probabilities, got {len(x)}.")
        if any(not 0.0 <= v <= 1.0 for v in x):
            raise ValueError(f"Activity probabilities must lie in [0, 1]: {x!r}")
        if sum(x) > 1.0 + MARGINAL_TOL:
            raise ValueError(f"Activity probabilities sum to {sum(x)!r}, above 1.")
        object.__setattr__(self, "x", x)
        exact = self.marginals()
        for i, (given, actual) in enumerate(zip(x, exact)):
            if abs(given - actual) > MARGINAL_TOL:
                raise ValueError(f"x_{i} = {given!r} but the exact activity probability is {actual!r}.")

    @property
    def n(self) -> int:
        return self.mrf.n

    def active_indicator(self, i: int) -> np.ndarray:
        """Returns 1 on the active label of Ω_i and 0 elsewhere."""
        return np.array([float(lab == self.active_label) for lab in self.mrf.supports[i]])

    @cached_property
    def chain(self) -> Optional[PathChain]:
        """The path's Markov chain, when the MRF is a path that arrives in path order."""
        if self.order != tuple(range(self.n)):
            return None
        try:
            return path_chain(self.mrf)
        except ValueError:
            return None

    @cached_property
    def joint(self) -> JointTable:
        return joint_table(self.mrf)

    def marginals(self) -> list[float]:
        """Returns the exact Pr[element i active] for every vertex."""
        return activity_marginals(self.mrf, self.active_label)


@dataclass(frozen=True)
class OcrsScheme:
    """Per-element selection probabilities, applied when an element arrives active and nothing is selected.

    Attributes:
        selection_probs (tuple[float, ...]): q_i, indexed by element.
        alpha (Optional[float]): The selectability the scheme was built for, if any.
    """

    selection_probs: tuple[float, ...]
    alpha: Optional[float] = None

    def __post_init__(self):
        probs = tuple(float(v) for v in self.selection_probs)
        if any(not 0.0 <= v <= 1.0 for v in probs):
            raise ValueError(f"Selection probabilities must lie in [0, 1]: {probs!r}")
        object.__setattr__(self, "selection_probs", probs)


class Selectability(NamedTuple):
    """The worst selection ratio and the per-element ratios (nan where x_i = 0)."""

    value: float
    ratios: tuple[float, ...]
    skipped: tuple[int, ...]


class ReachProbabilities(NamedTuple):
    """Per-element Pr[i active ∧ nothing selected before i] and Pr[i selected]."""

    reach: tuple[float, ...]
    selected: tuple[float, ...]


class HardOcrsParameters(NamedTuple):
    """The chain of the impossibility instance; elements are indexed 0..n."""

    p: float
    q: float
    n: int


class MarkovSchemeLp(NamedTuple):
    value: float
    scheme: OcrsScheme
    solution: LpSolution


def _forward(inst: OcrsInstance, choose: Callable[[int, float], float]) -> ReachProbabilities:
    """Runs a scheme forward; `choose(i, reach_i)` returns the selection probability of element i."""
    reach = [0.0] * inst.n
    selected = [0.0] * inst.n
    chain = inst.chain
    if chain is not None:
        mass = chain.initial.copy()
        for i in inst.order:
            if i > 0:
                mass = mass @ chain.transition(i)
            active = inst.active_indicator(i)
            reach[i] = float(mass @ active)
            q_i = choose(i, reach[i])
            selected[i] = q_i * reach[i]
            mass = mass * (1.0 - q_i * active)
    else:
        joint = inst.joint
        mass = joint.prob.copy()
        for i in inst.order:
            active = joint.coordinate_array(i, inst.active_indicator(i))
            reach[i] = float((mass * active).sum())
            q_i = choose(i, reach[i])
            selected[i] = q_i * reach[i]
            mass = mass * (1.0 - q_i * active)
    return ReachProbabilities(reach=tuple(reach), selected=tuple(selected))


def reach_probabilities(inst: OcrsInstance, scheme: OcrsScheme) -> ReachProbabilities:
    """Computes, for every element, the probability it arrives active with nothing selected, and of selecting it."""
    if len(scheme.selection_probs) != inst.n:
        raise ValueError(f"Scheme has {len(scheme.selection_probs)} probabilities for {inst.n} elements.")
    return _forward(inst, lambda i, _: scheme.selection_probs[i])


def adaptive_scheme(inst: OcrsInstance, alpha: float) -> OcrsScheme:
    """Builds the scheme selecting every element with probability exactly α·x_i.

    q_i = α·x_i / Pr[i active ∧ nothing selected before i], with the
    denominators taken from the forward pass of the scheme built so far.

    Raises:
        ValueError: If `alpha` is outside (0, 1].
        SchemeInfeasibleError: If some q_i would exceed 1.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    probs = [0.0] * inst.n

    def choose(i: int, reach: float) -> float:
        target = alpha * inst.x[i]
        if target == 0.0:
            return 0.0
        if reach <= 0.0:
            raise SchemeInfeasibleError(i, math.inf)
        q_i = target / reach
        if q_i > 1.0 + SCHEME_TOL:
            raise SchemeInfeasibleError(i, q_i)
        probs[i] = min(q_i, 1.0)
        return probs[i]

    _forward(inst, choose)
    return OcrsScheme(selection_probs=tuple(probs), alpha=alpha)


def selectability(inst: OcrsInstance, scheme: OcrsScheme) -> Selectability:
    """Returns min_i Pr[i selected] / x_i over elements with x_i > 0.

    Elements that are never active are skipped and listed; when every
    element is skipped the selectability is vacuously 1.
    """
    selected = reach_probabilities(inst, scheme).selected
    ratios, skipped = [], []
    for i, (chosen, x_i) in enumerate(zip(selected, inst.x)):
        if x_i <= 0.0:
            ratios.append(math.nan)
            skipped.append(i)
        else:
            ratios.append(chosen / x_i)
    if skipped:
        logger.warning(f"Selectability skipped elements {skipped} with x_i = 0.")
    value = min((r for r in ratios if not math.isnan(r)), default=1.0)
    return Selectability(value=value, ratios=tuple(ratios), skipped=tuple(skipped))


def threshold_scheme(inst: OcrsInstance, k: int) -> OcrsScheme:
    """Selects the first active element arriving at position `k` or later."""
    if not 0 <= k <= inst.n:
        raise ValueError(f"Threshold position must lie in 0..{inst.n}, got {k}")
    probs = [0.0] * inst.n
    for position, i in enumerate(inst.order):
        probs[i] = 1.0 if position >= k else 0.0
    return OcrsScheme(selection_probs=tuple(probs))


def hard_ocrs_parameters(delta: float) -> HardOcrsParameters:
    """Returns p = 1/(1+e^δ), q = 1/(1+e^{3δ}) and the last index n = ⌊(p+q)/q⌋ - 1.

    Raises:
        ValueError: If `delta` is not positive or the chain has fewer than two elements.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    p = 1.0 / (1.0 + math.exp(delta))
    q = 1.0 / (1.0 + math.exp(3 * delta))
    count = math.floor((p + q) / q)
    if count < 2:
        raise ValueError(f"delta={delta} leaves {count} element(s); the construction needs at least two.")
    return HardOcrsParameters(p=p, q=q, n=count - 1)


def hard_ocrs_instance(delta: float) -> OcrsInstance:
    """Builds the stationary binary path on which no OCRS beats `max_alpha`.

    Edge potentials are +δ on equal labels and -δ otherwise. An inactive
    element is followed by an active one with probability q and an active one
    by an inactive one with probability p, so every x_i equals q/(p+q).
    """
    p, q, n = hard_ocrs_parameters(delta)
    supports = [(0, 1)] * (n + 1)
    edges = [{(a, b): (delta if a == b else -delta) for a in (0, 1) for b in (0, 1)}] * n
    first = AnchoredConditional(anchor=None, target={0: p / (p + q), 1: q / (p + q)})
    rest = AnchoredConditional(anchor=0, target={0: 1 - q, 1: q})
    mrf = build_path_mrf(supports, edges, [first] + [rest] * n)
    logger.debug(f"Hard OCRS instance for delta={delta}: p={p:.6g}, q={q:.6g}, {n + 1} elements.")
    return OcrsInstance(mrf=mrf, x=tuple(q / (p + q) for _ in range(n + 1)), delta_nominal=delta)


def _alpha_coefficient(p: float, q: float, i: int) -> float:
    s = p + q
    r = 1.0 - s
    return (i + 1) * q / s + p * (1.0 - r ** (i + 1)) / s**2


def y_closed_form(p: float, q: float, i: int, alpha: float) -> float:
    """Returns Pr[element i active ∧ nothing selected through i] for the exact-α scheme on the stationary chain."""
    return q / (p + q) * (1.0 - alpha * _alpha_coefficient(p, q, i))


def y_recursion(p: float, q: float, n: int, alpha: float) -> list[np.ndarray]:
    """Iterates y_0 = π - (αa, 0), y_i = y_{i-1}·P - (αa, 0) with a = q/(p+q).

    Vectors are (active, inactive); entry i is the mass of each label at
    element i with nothing selected through i.
    """
    a = q / (p + q)
    transition = np.array([[1 - p, p], [q, 1 - q]])
    drain = np.array([alpha * a, 0.0])
    current = np.array([a, 1 - a]) - drain
    history = [current]
    for _ in range(n):
        current = current @ transition - drain
        history.append(current)
    return history


def max_alpha(p: float, q: float, n: int) -> float:
    """Returns the largest α for which selecting every element 0..n with probability α·x_i stays feasible.

    Feasibility at element i is y_i ≥ 0, which is linear in α; the answer is
    the smallest root over i, capped at 1.

    Raises:
        ValueError: If p or q is outside (0, 1) or n is negative.
    """
    if not (0 < p < 1 and 0 < q < 1) or p + q > 1:
        raise ValueError(f"Need p, q in (0, 1) with p + q ≤ 1, got p={p}, q={q}")
    if n < 0:
        raise ValueError(f"n must be nonnegative, got {n}")
    return min(1.0, min(1.0 / _alpha_coefficient(p, q, i) for i in range(n + 1)))


def markov_scheme_lp(inst: OcrsInstance, *, solver: Optional[DenseSimplexSolver] = None) -> MarkovSchemeLp:
    """Finds the best common selectability on a path MRF by linear programming.

    With z_i = Pr[i selected] and B_ij = Pr[t_i active | t_j active], the
    chain's memorylessness gives Pr[i active ∧ nothing selected before i]
    = x_i - Σ_{j<i} B_ij·z_j for any online scheme, so the program
    maximizes c subject to z_i ≥ c·x_i and z_i + Σ_{j<i} B_ij·z_j ≤ x_i.

    Raises:
        ValueError: If the instance is not a path arriving in path order.
    """
    chain = inst.chain
    if chain is None:
        raise ValueError("The scheme LP needs a path MRF arriving in path order.")
    n = inst.n
    coupling = np.zeros((n, n))
    for j in range(n):
        start = inst.active_indicator(j)
        if not start.any():
            continue
        mass = start
        for i in range(j + 1, n):
            mass = mass @ chain.transition(i)
            coupling[i, j] = float(mass @ inst.active_indicator(i))

    x = np.array(inst.x)
    capacity = np.hstack([np.eye(n) + coupling, np.zeros((n, 1))])
    coverage = np.hstack([-np.eye(n), x[:, None]])
    cap = np.zeros((1, n + 1))
    cap[0, n] = 1.0
    objective = np.zeros(n + 1)
    objective[n] = 1.0
    problem = LpProblem(
        c=objective,
        a_ub=np.vstack([capacity, coverage, cap]),
        b_ub=np.concatenate([x, np.zeros(n), [1.0]]),
        variable_names=tuple(f"z_{i}" for i in range(n)) + ("c",),
    )
    solution = lp_solve(problem, solver=solver)
    z = np.clip(solution.x[:n], 0.0, None)

    probs = [0.0] * n

    def choose(i: int, reach: float) -> float:
        probs[i] = 0.0 if reach <= 0.0 else min(1.0, float(z[i]) / reach)
        return probs[i]

    _forward(inst, choose)
    scheme = OcrsScheme(selection_probs=tuple(probs), alpha=solution.objective)
    return MarkovSchemeLp(value=solution.objective, scheme=scheme, solution=solution)


def verify_ocrs_separation(delta: float, instances: tuple[OcrsInstance, ...] = ()) -> list[BoundReport]:
    """Checks the OCRS guarantee on given instances and the impossibility on the hard path.

    For every instance (the hard path included) the exact-α scheme at
    α = 1/(1 + e^{4Δ}) must be feasible with selectability α, and every
    reach probability must stay above e^{-4Δ}·x_i·(1-α). On the hard path
    the analytic `max_alpha` must be at most 4e^{-δ}, the best threshold
    scheme and the scheme LP must not exceed it, and the closed form of the
    y-recursion must match its iteration.

    Args:
        delta (float): The nominal δ of the hard path.
        instances (tuple[OcrsInstance, ...]): Extra instances for the guarantee checks.
    """
    hard = hard_ocrs_instance(delta)
    p, q, n = hard_ocrs_parameters(delta)
    reports = []
    for index, inst in enumerate((*instances, hard)):
        reports.extend(check_adaptive_guarantee(inst, name_suffix=str(index)))

    ceiling = max_alpha(p, q, n)
    witnesses = {"p": p, "q": q, "elements": n + 1}
    reports.append(BoundReport("ocrs_max_alpha_bound", ceiling, 4 * math.exp(-delta), witnesses))
    reports.append(BoundReport("ocrs_max_alpha_pq", ceiling, 4 * (p + q), witnesses))
    iterated = float(y_recursion(p, q, n, ceiling)[-1][0])
    reports.append(
        equality_report("ocrs_y_closed_form", y_closed_form(p, q, n, ceiling), iterated, rel_tol=SCHEME_TOL)
    )

    best, best_k = 0.0, 0
    for k in range(hard.n + 1):
        value = selectability(hard, threshold_scheme(hard, k)).value
        if value > best:
            best, best_k = value, k
    reports.append(
        BoundReport("ocrs_threshold_search", best, ceiling, {"best_position": best_k}, tolerance=SEARCH_TOL)
    )
    lp = markov_scheme_lp(hard)
    reports.append(BoundReport("ocrs_markov_lp", lp.value, ceiling, {"iterations": lp.solution.iterations}))
    return reports


def check_adaptive_guarantee(inst: OcrsInstance, name_suffix: str = "") -> list[BoundReport]:
    """Checks the exact-α scheme at α = 1/(1 + e^{4Δ}) on one instance, Δ being the computed degree."""
    delta = max_weighted_degree(inst.mrf).delta
    alpha = 1.0 / (1.0 + math.exp(4 * delta))
    suffix = f"[{name_suffix}]" if name_suffix else ""
    try:
        scheme = adaptive_scheme(inst, alpha)
    except SchemeInfeasibleError as exc:
        return [
            BoundReport(
                bound_name=f"ocrs_adaptive_feasible{suffix}",
                lhs=exc.probability,
                rhs=1.0,
                witnesses={"index": exc.index, "alpha": alpha},
                tolerance=SCHEME_TOL,
            )
        ]
    value = selectability(inst, scheme).value
    reach = reach_probabilities(inst, scheme).reach
    floor = [math.exp(-4 * delta) * x_i * (1 - alpha) for x_i in inst.x]
    worst = min(range(inst.n), key=lambda i: reach[i] - floor[i])
    return [
        equality_report(f"ocrs_adaptive_selectability{suffix}", value, alpha, rel_tol=SCHEME_TOL, delta=delta),
        BoundReport(
            bound_name=f"ocrs_reach_floor{suffix}",
            lhs=floor[worst],
            rhs=reach[worst],
            witnesses={"element": worst, "alpha": alpha},
            tolerance=NORMALIZATION_TOL,
        ),
    ]
