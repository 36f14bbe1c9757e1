"""Single-item prophet inequalities over MRF-correlated values.

Values arrive in a fixed order as X_i = g_i(t_i), with t drawn from an MRF.
This module evaluates stopping rules exactly: the randomized geometric
threshold rule with its O(Δ) guarantee, the optimal online stopping rule
(by backward induction over observed prefixes, or over states on a path),
and the path instance on which no online rule beats a Θ(Δ) fraction of the
expected maximum.
"""

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping, NamedTuple, Optional

import numpy as np

from .config import DEFAULT_SUPPORT_CAP, NORMALIZATION_TOL, ONLINE_DP_SUPPORT_CAP, RELATIVE_TOL
from .exceptions import NoValidHorizonError, SupportSizeError
from .models import BoundReport, equality_report
from .mrf import (
    AnchoredConditional,
    JointTable,
    Label,
    Mrf,
    build_path_mrf,
    joint_table,
    max_weighted_degree,
    path_chain,
)
from .utils import logger_factory

logger = logger_factory.get_logger(__name__)

#: Agreement required between the prefix DP and the per-state DP.
DP_AGREEMENT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class ProphetInstance:
    """A prophet problem: an MRF over types, a value map per vertex and an arrival order.

    Attributes:
        mrf (Mrf): The type distribution.
        value_maps (tuple[Mapping[Label, float], ...]): g_i over Ω_i, one per vertex.
        order (Optional[tuple[int, ...]]): Arrival order; None means 0, 1, ..., n-1.
        delta_nominal (Optional[float]): The edge magnitude a generator was asked for, if any.
    """

    mrf: Mrf
    value_maps: tuple[Mapping[Label, float], ...]
    order: Optional[tuple[int, ...]] = None
    delta_nominal: Optional[float] = None

    def __post_init__(self):
        value_maps = tuple({lab: float(v) for lab, v in g.items()} for g in self.value_maps)
        if len(value_maps) != self.mrf.n:
            raise ValueError(f"Expected {self.mrf.n} value maps, got {len(value_maps)}.")
        for i, g in enumerate(value_maps):
            if set(g) != set(self.mrf.supports[i]):
                raise ValueError(f"Value map of vertex {i} must cover exactly {self.mrf.supports[i]!r}.")
            if any(not math.isfinite(v) or v < 0 for v in g.values()):
                raise ValueError(f"Values of vertex {i} must be finite and nonnegative.")
        order = tuple(range(self.mrf.n)) if self.order is None else tuple(int(i) for i in self.order)
        if sorted(order) != list(range(self.mrf.n)):
            raise ValueError(f"{order!r} is not a permutation of 0..{self.mrf.n - 1}")
        object.__setattr__(self, "value_maps", value_maps)
        object.__setattr__(self, "order", order)

    @property
    def n(self) -> int:
        return self.mrf.n

    def values(self, i: int) -> np.ndarray:
        """Returns g_i as an array aligned with Ω_i."""
        return np.array([self.value_maps[i][lab] for lab in self.mrf.supports[i]], dtype=float)

    @cached_property
    def joint(self) -> JointTable:
        return joint_table(self.mrf)


@dataclass(frozen=True)
class ThresholdPolicy:
    """A randomized single-threshold stopping rule.

    A level is drawn according to the weights; the first arriving value at
    or above its threshold is accepted.

    Attributes:
        levels (tuple[tuple[float, float], ...]): (threshold, weight) pairs.
    """

    levels: tuple[tuple[float, float], ...]

    def __post_init__(self):
        levels = tuple((float(t), float(w)) for t, w in self.levels)
        if not levels:
            raise ValueError("A threshold policy needs at least one level.")
        if any(math.isnan(t) or t < 0 for t, _ in levels):
            raise ValueError(f"Thresholds must be nonnegative: {levels!r}")
        if any(w < 0 for _, w in levels) or abs(sum(w for _, w in levels) - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"Level weights must be nonnegative and sum to 1: {levels!r}")
        object.__setattr__(self, "levels", levels)

    @property
    def thresholds(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.levels)


@dataclass(frozen=True)
class LowerBoundClosedForm:
    """The quantities of the path lower-bound construction.

    Component 0 of every two-vector refers to a path whose first value is 1,
    component 1 to one whose first value is 0.

    Attributes:
        p (float): Pr(t_i = 0 | t_{i-1} = 1).
        q (float): Pr(t_i = 1 | t_{i-1} = 0).
        n (int): The horizon; the path has n + 1 vertices.
        lambdas (tuple[float, ...]): λ_1, ..., λ_n.
        r1 (float): Optimal online reward R_n^(1).
        r0 (float): R_n^(0).
        m1 (float): Expected maximum M_n^(1), from the recursion.
        m0 (float): M_n^(0).
        r_history (tuple[tuple[float, float], ...]): R_0, ..., R_n.
        m_history (tuple[tuple[float, float], ...]): M_0, ..., M_n.
        delta_nominal (float): The edge magnitude δ the instance was built for.
    """

    p: float
    q: float
    n: int
    lambdas: tuple[float, ...]
    r1: float
    r0: float
    m1: float
    m0: float
    r_history: tuple[tuple[float, float], ...]
    m_history: tuple[tuple[float, float], ...]
    delta_nominal: float


class ProphetEvaluation(NamedTuple):
    """Everything the `prophet` suite reports for one instance."""

    delta_computed: float
    e_max: float
    alg_value: float
    opt_online: Optional[float]
    bound: float


def _value_arrays(inst: ProphetInstance) -> list[np.ndarray]:
    joint = inst.joint
    return [joint.coordinate_array(i, inst.values(i)) for i in range(inst.n)]


def expected_max(inst: ProphetInstance) -> float:
    """Returns E[max_i X_i] by enumerating the joint table."""
    arrays = _value_arrays(inst)
    best = arrays[0]
    for arr in arrays[1:]:
        best = np.maximum(best, arr)
    return float((inst.joint.prob * best).sum())


def expected_max_markov(inst: ProphetInstance) -> float:
    """Returns E[max_i X_i] on a path MRF without building the joint table.

    The forward pass tracks the mass of every (current label, running maximum)
    pair, so the work grows with the number of distinct values rather than
    with the product support.

    Raises:
        ValueError: If the MRF is not a path in arrival order.
    """
    _require_path_order(inst)
    chain = path_chain(inst.mrf)
    values = [inst.values(i) for i in range(inst.n)]
    state: dict[tuple[int, float], float] = {}
    for a, p in enumerate(chain.initial.tolist()):
        if p > 0:
            key = (a, float(values[0][a]))
            state[key] = state.get(key, 0.0) + p
    for i in range(1, inst.n):
        matrix = chain.transition(i)
        following: dict[tuple[int, float], float] = {}
        for (a, running), mass in state.items():
            for b, p in enumerate(matrix[a].tolist()):
                if p > 0:
                    key = (b, max(running, float(values[i][b])))
                    following[key] = following.get(key, 0.0) + mass * p
        state = following
    return sum(mass * running for (_, running), mass in state.items())


def evaluate_policy(inst: ProphetInstance, policy: ThresholdPolicy) -> float:
    """Returns the exact expected value collected by a threshold policy.

    Acceptance is closed: a value equal to the threshold is taken.
    """
    arrays = _value_arrays(inst)
    prob = inst.joint.prob
    total = 0.0
    for threshold, weight in policy.levels:
        if weight == 0:
            continue
        collected = np.zeros(prob.shape)
        taken = np.zeros(prob.shape, dtype=bool)
        for i in inst.order:
            x = np.broadcast_to(arrays[i], prob.shape)
            hit = ~taken & (x >= threshold)
            collected = np.where(hit, x, collected)
            taken = taken | hit
        total += weight * float((prob * collected).sum())
    return total


def level_count(delta: float) -> int:
    """Returns K = ⌈4Δ⌉ + 1, the largest exponent of the geometric threshold grid."""
    return math.ceil(4 * delta - RELATIVE_TOL) + 1


def geometric_policy(inst: ProphetInstance, delta: float) -> ThresholdPolicy:
    """Builds the randomized geometric threshold rule for degree bound `delta`.

    Thresholds are e^z·E[max] for z ∈ {-1, 0, ..., K}, each with weight 1/(K + 2).

    Raises:
        ValueError: If `delta` is negative or every value is zero.
    """
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    opt = expected_max(inst)
    if opt <= 0:
        raise ValueError("The expected maximum is zero; there is nothing to scale thresholds by.")
    k = level_count(delta)
    weight = 1.0 / (k + 2)
    return ThresholdPolicy(tuple((math.exp(z) * opt, weight) for z in range(-1, k + 1)))


def optimal_online(inst: ProphetInstance, *, support_cap: int = ONLINE_DP_SUPPORT_CAP) -> float:
    """Returns the optimal online reward by backward induction over observed prefixes.

    With P_k the joint mass of the first k arrivals, the mass-weighted
    continuation values satisfy U_n = 0 and
    U_k(prefix) = Σ_s max(P_{k+1}(prefix, s)·X_{k+1}(s), U_{k+1}(prefix, s)),
    and the reward is U_0.

    Raises:
        SupportSizeError: If the product support exceeds `support_cap`.
    """
    size = inst.joint.prob.size
    if size > support_cap:
        raise SupportSizeError("Online DP support", size, support_cap)
    order = list(inst.order)
    mass = np.transpose(inst.joint.prob, order)
    values = [inst.values(i) for i in order]
    continuation = np.zeros(mass.shape)
    for k in range(inst.n - 1, -1, -1):
        shape = [1] * (k + 1)
        shape[k] = len(values[k])
        stop = mass * values[k].reshape(shape)
        continuation = np.maximum(stop, continuation).sum(axis=k)
        mass = mass.sum(axis=k)
    return float(continuation)


def _require_path_order(inst: ProphetInstance):
    if inst.order != tuple(range(inst.n)):
        raise ValueError("The per-state recursions need the arrival order to follow the path.")


def optimal_online_markov(inst: ProphetInstance) -> float:
    """Returns the optimal online reward on a path MRF by a per-state DP.

    Given the current label, the future of a path is independent of the
    past, so V_i(a) = max(X_i(a), Σ_b Pr(b | a)·V_{i+1}(b)) is optimal.

    Raises:
        ValueError: If the MRF is not a path in arrival order.
    """
    _require_path_order(inst)
    chain = path_chain(inst.mrf)
    value = inst.values(inst.n - 1)
    for i in range(inst.n - 2, -1, -1):
        value = np.maximum(inst.values(i), chain.transition(i + 1) @ value)
    return float(chain.initial @ value)


def check_prophet_guarantee(inst: ProphetInstance, delta: Optional[float] = None) -> BoundReport:
    """Checks E[max] ≤ (20Δ + 15)·E[ALG] for the geometric threshold rule.

    Args:
        inst (ProphetInstance): The instance.
        delta (Optional[float]): Degree bound; defaults to the MRF's maximum weighted degree.
    """
    if delta is None:
        delta = max_weighted_degree(inst.mrf).delta
    e_max = expected_max(inst)
    alg = evaluate_policy(inst, geometric_policy(inst, delta)) if e_max > 0 else 0.0
    return BoundReport(
        bound_name="prophet_guarantee",
        lhs=e_max,
        rhs=(20 * delta + 15) * alg,
        witnesses={"alg_value": alg, "delta": delta, "levels": level_count(delta) + 2},
    )


def evaluate_instance(inst: ProphetInstance, policy: str = "geometric") -> ProphetEvaluation:
    """Computes the quantities of one `prophet` suite row.

    Args:
        inst (ProphetInstance): The instance.
        policy (str): "geometric" for the geometric threshold rule, "optimal" for the online optimum.
    """
    delta = max_weighted_degree(inst.mrf).delta
    e_max = expected_max(inst)
    opt = None
    if inst.joint.prob.size <= ONLINE_DP_SUPPORT_CAP:
        opt = optimal_online(inst)
    elif inst.order == tuple(range(inst.n)) and _is_path(inst.mrf):
        opt = optimal_online_markov(inst)
    if policy == "optimal":
        if opt is None:
            raise SupportSizeError("Online DP support", inst.joint.prob.size, ONLINE_DP_SUPPORT_CAP)
        alg = opt
    elif policy == "geometric":
        alg = evaluate_policy(inst, geometric_policy(inst, delta)) if e_max > 0 else 0.0
    else:
        raise ValueError(f"Unknown policy {policy!r}; expected 'geometric' or 'optimal'.")
    return ProphetEvaluation(delta_computed=delta, e_max=e_max, alg_value=alg, opt_online=opt, bound=20 * delta + 15)


def _is_path(mrf: Mrf) -> bool:
    try:
        path_chain(mrf)
    except ValueError:
        return False
    return True


def hard_instance(delta: float) -> tuple[ProphetInstance, LowerBoundClosedForm]:
    """Builds the path instance on which no online rule beats (δ+1)/2 against the prophet.

    The path has vertices 0..n with Ω_0 = {1} and Ω_i = {0, 1}, edge
    potentials +δ on equal labels and -δ otherwise, and vertex potentials
    chosen so that Pr(t_i = 0 | t_{i-1} = 1) = 1/2. The values
    X_i = t_i·λ_n·λ_{n-1}···λ_{n-i+1} make stopping at any active vertex
    exactly as good as continuing, so the optimal online reward is 1.

    Args:
        delta (float): The edge magnitude δ > 0.

    Returns:
        tuple[ProphetInstance, LowerBoundClosedForm]: The instance and its recursion quantities.

    Raises:
        ValueError: If `delta` is not positive.
        NoValidHorizonError: If 1/2 - q ≤ 2q, which leaves no horizon.
    """
    if not delta > 0:
        raise ValueError(f"delta must be positive, got {delta}")
    p = 0.5
    q = 1.0 / (1.0 + math.exp(4 * delta))
    r = 1.0 - p - q
    if r <= 2 * q:
        raise NoValidHorizonError(delta, q)
    n = math.ceil(math.log(2 * q) / math.log(r))
    lambdas = tuple((q + p * r ** (k - 1)) / (q + p * r**k) for k in range(1, n + 1))

    supports = [(1,)] + [(0, 1)] * n
    edges = [
        {(a, b): (delta if a == b else -delta) for a in supports[i - 1] for b in supports[i]} for i in range(1, n + 1)
    ]
    anchors = [None] + [AnchoredConditional(anchor=1, target={0: p, 1: 1 - p})] * n
    mrf = build_path_mrf(supports, edges, anchors)

    value_maps = []
    scale = 1.0
    for i in range(n + 1):
        value_maps.append({lab: lab * scale for lab in supports[i]})
        if i < n:
            scale *= lambdas[n - 1 - i]
    inst = ProphetInstance(mrf=mrf, value_maps=tuple(value_maps), delta_nominal=delta)

    transition = np.array([[1 - p, p], [q, 1 - q]])
    reward = np.array([1.0, 0.0])
    maximum = np.array([1.0, 0.0])
    r_history, m_history = [tuple(reward.tolist())], [tuple(maximum.tolist())]
    for k in range(1, n + 1):
        reward = lambdas[k - 1] * transition @ reward
        maximum = lambdas[k - 1] * transition @ maximum + np.array([p * (1 - q) ** (k - 1), 0.0])
        r_history.append(tuple(reward.tolist()))
        m_history.append(tuple(maximum.tolist()))
    closed_form = LowerBoundClosedForm(
        p=p,
        q=q,
        n=n,
        lambdas=lambdas,
        r1=float(reward[0]),
        r0=float(reward[1]),
        m1=float(maximum[0]),
        m0=float(maximum[1]),
        r_history=tuple(r_history),
        m_history=tuple(m_history),
        delta_nominal=delta,
    )
    logger.debug(f"Hard prophet instance for delta={delta}: q={q:.6g}, n={n}, M={closed_form.m1:.12g}.")
    return inst, closed_form


def expected_max_closed_form(p: float, q: float, n: int) -> float:
    """Evaluates the closed-form expected maximum of the lower-bound path.

    M_n = 1 + p·Σ_{k=1..n} (1-q)^{k-1}·(q + p·r^k)(q + p·r^{n-k}) / ((q + p·r^n)(q + p)),
    with r = 1 - p - q.
    """
    r = 1.0 - p - q
    total = sum(
        (1 - q) ** (k - 1) * (q + p * r**k) * (q + p * r ** (n - k)) / ((q + p * r**n) * (q + p))
        for k in range(1, n + 1)
    )
    return 1.0 + p * total


def verify_lower_bound(inst: ProphetInstance, cf: LowerBoundClosedForm) -> list[BoundReport]:
    """Checks the lower-bound instance against its closed forms.

    The optimal online reward must be R_n^(1) and the expected maximum must
    match the closed form (both to 1e-9 relative); M/R must reach
    (δ + 1)/2 for the nominal δ. When the joint table is small enough, the
    prefix DP is also checked against the per-state DP.
    """
    witnesses = {"delta_computed": max_weighted_degree(inst.mrf).delta, "n": cf.n, "q": cf.q}
    online = optimal_online_markov(inst)
    closed = expected_max_closed_form(cf.p, cf.q, cf.n)
    if math.prod(inst.mrf.shape) <= DEFAULT_SUPPORT_CAP:
        e_max = expected_max(inst)
    else:
        e_max = expected_max_markov(inst)
    reports = [
        equality_report("prophet_lower_online", online, cf.r1, rel_tol=RELATIVE_TOL, **witnesses),
        equality_report("prophet_lower_expected_max", e_max, closed, rel_tol=RELATIVE_TOL, **witnesses),
        equality_report("prophet_lower_recursion", cf.m1, closed, rel_tol=RELATIVE_TOL, **witnesses),
        BoundReport(
            bound_name="prophet_lower_ratio",
            lhs=(cf.delta_nominal + 1) / 2,
            rhs=e_max / online,
            witnesses=witnesses,
        ),
    ]
    if math.prod(inst.mrf.shape) <= ONLINE_DP_SUPPORT_CAP:
        reports.append(
            equality_report("prophet_lower_dp_agreement", optimal_online(inst), online, rel_tol=DP_AGREEMENT_TOL)
        )
    return reports
