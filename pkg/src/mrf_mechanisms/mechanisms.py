"""Simple mechanisms, exact buyer behaviour on menus, and the optimal-revenue LP.

A single buyer facing a menu of (lottery, price) options picks the option
maximizing expected value minus price, breaking ties toward the higher
price and then the lower index. Every revenue in this module is an exact
expectation over the positive-probability outcomes of the distribution.
"""

import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .config import UTILITY_TIE_TOL, get_lp_variable_cap
from .exceptions import SupportSizeError
from .lp import DenseSimplexSolver, LpProblem, LpSolution, lp_solve
from .utils import all_subsets, logger_factory, subset_from_mask
from .valuation import ValuationDistribution, ValuationKind

logger = logger_factory.get_logger(__name__)

#: Index `buyer_choice` returns for the implicit (∅, 0) option.
NULL_OPTION_INDEX = -1

#: Relative slack under which two candidate revenues count as equal.
REVENUE_TIE_TOL = 1e-12


@dataclass(frozen=True)
class MenuOption:
    """One entry of a menu.

    Attributes:
        lottery (Mapping[frozenset[int], float]): A distribution over item subsets.
        price (float): The price charged for the lottery.
    """

    lottery: Mapping[frozenset[int], float]
    price: float

    def __post_init__(self):
        lottery = {frozenset(s): float(p) for s, p in self.lottery.items() if p != 0}
        if any(p < 0 for p in lottery.values()):
            raise ValueError(f"Lottery probabilities must be nonnegative: {lottery!r}")
        total = sum(lottery.values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"Lottery probabilities sum to {total!r}, not 1.")
        if not math.isfinite(self.price) or self.price < 0:
            raise ValueError(f"Menu prices must be finite and nonnegative, got {self.price!r}.")
        object.__setattr__(self, "lottery", lottery)
        object.__setattr__(self, "price", float(self.price))

    def expected_value(self, v: Callable[[frozenset[int]], float]) -> float:
        return sum(p * v(s) for s, p in self.lottery.items())


@dataclass(frozen=True)
class Menu:
    """A list of options; the null option (∅, 0) is always implicitly available."""

    options: tuple[MenuOption, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "options", tuple(self.options))

    def __len__(self) -> int:
        return len(self.options)


@dataclass(frozen=True)
class PriceVector:
    """Posted per-item prices; `math.inf` means the item is not offered.

    Attributes:
        prices (tuple[float, ...]): One price per item id.
    """

    prices: tuple[float, ...]

    def __post_init__(self):
        prices = tuple(float(p) for p in self.prices)
        if any(math.isnan(p) or p < 0 for p in prices):
            raise ValueError(f"Prices must be nonnegative or +inf, got {prices!r}")
        object.__setattr__(self, "prices", prices)

    def __getitem__(self, i: int) -> float:
        return self.prices[i]

    @classmethod
    def not_offered(cls, n: int) -> "PriceVector":
        return cls(tuple(math.inf for _ in range(n)))


class SingleItemPricing(NamedTuple):
    revenue: float
    best_price: float


class PricingResult(NamedTuple):
    revenue: float
    prices: PriceVector
    grid_restricted: bool = False


class OptimalRevenue(NamedTuple):
    """The LP optimum and the menu it induces.

    `assignment[k]` is the menu option meant for the k-th positive outcome of
    the distribution's support.
    """

    revenue: float
    menu: Menu
    iterations: int
    solution: Optional[LpSolution]
    n_types: int
    assignment: tuple[int, ...]


def _choose(utilities: np.ndarray, prices: np.ndarray) -> int:
    best, best_utility, best_price = NULL_OPTION_INDEX, 0.0, 0.0
    for k, (u, p) in enumerate(zip(utilities.tolist(), prices.tolist())):
        if u > best_utility + UTILITY_TIE_TOL:
            best, best_utility, best_price = k, u, p
        elif u >= best_utility - UTILITY_TIE_TOL and p > best_price:
            best, best_utility, best_price = k, max(u, best_utility), p
    return best


def buyer_choice(menu: Menu, v: Callable[[frozenset[int]], float]) -> int:
    """Returns the option a utility-maximizing buyer with valuation `v` picks.

    Args:
        menu (Menu): The menu.
        v (Callable[[frozenset[int]], float]): The realized valuation over item sets.

    Returns:
        int: The chosen option's index, or `NULL_OPTION_INDEX` for (∅, 0).
    """
    utilities = np.array([option.expected_value(v) - option.price for option in menu.options], dtype=float)
    prices = np.array([option.price for option in menu.options], dtype=float)
    return _choose(utilities, prices)


def _option_weights(D: ValuationDistribution, menu: Menu) -> np.ndarray:
    """Returns, per option, the lottery's mass on every subset bitmask of `D.items`."""
    position = {item: k for k, item in enumerate(D.items)}
    weights = np.zeros((len(menu), 2 ** len(D.items)), dtype=float)
    for k, option in enumerate(menu.options):
        for subset, p in option.lottery.items():
            mask = sum(1 << position[i] for i in subset if i in position)
            weights[k, mask] += p
    return weights


def _menu_utilities(D: ValuationDistribution, menu: Menu) -> tuple[np.ndarray, np.ndarray]:
    prices = np.array([option.price for option in menu.options], dtype=float)
    expected = D.subset_values @ _option_weights(D, menu).T
    return expected - prices[None, :], prices


def menu_revenue(D: ValuationDistribution, menu: Menu) -> float:
    """Returns the exact expected payment when the buyer faces `menu`."""
    if not menu.options or not D.support:
        return 0.0
    utilities, prices = _menu_utilities(D, menu)
    revenue = 0.0
    for row, p in enumerate(D.probabilities.tolist()):
        choice = _choose(utilities[row], prices)
        if choice != NULL_OPTION_INDEX:
            revenue += p * prices[choice]
    return revenue


def incentive_violation(D: ValuationDistribution, menu: Menu, assignment: Sequence[int]) -> float:
    """Returns the largest IC or IR violation of a type-to-option assignment.

    Args:
        D (ValuationDistribution): The distribution whose support rows the assignment covers.
        menu (Menu): The menu.
        assignment (Sequence[int]): Option index per positive outcome, in `D.support` order.
    """
    if not menu.options:
        return 0.0
    utilities, _ = _menu_utilities(D, menu)
    worst = 0.0
    for row, own in enumerate(assignment):
        own_utility = 0.0 if own == NULL_OPTION_INDEX else utilities[row, own]
        worst = max(worst, -own_utility, float(utilities[row].max()) - own_utility)
    return worst


def separate_pricing_menu(prices: PriceVector, items: Sequence[int]) -> Menu:
    """Builds the deterministic menu offering every bundle of offered items at the summed price."""
    offered = [i for i in items if math.isfinite(prices[i])]
    options = [
        MenuOption(lottery={subset: 1.0}, price=sum(prices[i] for i in subset))
        for subset in all_subsets(offered)
        if subset
    ]
    return Menu(tuple(options))


def _posted_price(values: np.ndarray, probs: np.ndarray) -> SingleItemPricing:
    """Best take-it-or-leave-it price for a value distribution; ties go to the lower price."""
    best = SingleItemPricing(revenue=0.0, best_price=math.inf)
    for price in np.unique(values[values > 0]).tolist():
        revenue = price * float(probs[values >= price].sum())
        if revenue > best.revenue + REVENUE_TIE_TOL * max(1.0, best.revenue):
            best = SingleItemPricing(revenue=revenue, best_price=price)
    return best


def rev_i(D: ValuationDistribution, i: int) -> SingleItemPricing:
    """Returns Rev_i(D): the best revenue from posting a price on item `i` alone.

    Raises:
        ValueError: If item `i` is not in play.
    """
    if i not in D.item_set:
        raise ValueError(f"Item {i} is not in play (items: {sorted(D.item_set)}).")
    if not D.support:
        return SingleItemPricing(0.0, math.inf)
    column = D.items.index(i)
    return _posted_price(D.singleton_matrix[:, column], D.probabilities)


def brev(D: ValuationDistribution) -> SingleItemPricing:
    """Returns BRev(D): the best revenue from posting a single price on the grand bundle."""
    if not D.item_set or not D.support:
        return SingleItemPricing(0.0, math.inf)
    return _posted_price(D.subset_values[:, -1], D.probabilities)


def _price_grid(D: ValuationDistribution) -> list[list[float]]:
    grids = []
    for column in range(len(D.items)):
        values = D.singleton_matrix[:, column]
        grids.append(np.unique(values[values > 0]).tolist() + [math.inf])
    return grids


def _full_vector(D: ValuationDistribution, local: Sequence[float]) -> PriceVector:
    prices = [math.inf] * D.n
    for item, p in zip(D.items, local):
        prices[item] = p
    return PriceVector(tuple(prices))


def srev(D: ValuationDistribution) -> PricingResult:
    """Returns SRev(D), the best revenue from posting separate item prices.

    Additive buyers are solved exactly item by item. For other classes every
    price vector on the grid of singleton support values (plus +inf) is
    simulated with a seller-favourable demand choice, and the result is
    flagged `grid_restricted`.
    """
    if not D.item_set or not D.support:
        return PricingResult(0.0, PriceVector.not_offered(D.n))
    if D.g.kind is ValuationKind.ADDITIVE:
        per_item = [rev_i(D, i) for i in D.items]
        return PricingResult(
            revenue=sum(r.revenue for r in per_item),
            prices=_full_vector(D, [r.best_price for r in per_item]),
        )

    k = len(D.items)
    membership = ((np.arange(2**k)[:, None] >> np.arange(k)) & 1).astype(bool)
    best_revenue, best_local = 0.0, [math.inf] * k
    for local in product(*_price_grid(D)):
        local_prices = np.array(local)
        costs = np.where(membership, local_prices[None, :], 0.0).sum(axis=1)
        utilities = D.subset_values - costs[None, :]
        top = utilities.max(axis=1, keepdims=True)
        candidates = utilities >= top - UTILITY_TIE_TOL
        payments = np.where(candidates & np.isfinite(costs)[None, :], costs[None, :], -np.inf).max(axis=1)
        revenue = float(D.probabilities @ payments)
        if revenue > best_revenue + REVENUE_TIE_TOL * max(1.0, best_revenue):
            best_revenue, best_local = revenue, list(local)
    logger.debug(f"Grid search for SRev over {k} items found {best_revenue:.12g}.")
    return PricingResult(best_revenue, _full_vector(D, best_local), grid_restricted=True)


def srev_prime(D: ValuationDistribution) -> PricingResult:
    """Returns SRev′(D): separate prices, counting revenue only when exactly one item meets its price.

    Between consecutive support values the objective is nondecreasing in
    each price, so the grid of support values (plus +inf) is exact.
    """
    if not D.item_set or not D.support:
        return PricingResult(0.0, PriceVector.not_offered(D.n))
    values = D.singleton_matrix
    best_revenue, best_local = 0.0, [math.inf] * len(D.items)
    for local in product(*_price_grid(D)):
        local_prices = np.array(local)
        meets = values >= local_prices[None, :]
        exactly_one = meets.sum(axis=1) == 1
        payments = np.where(meets, local_prices[None, :], 0.0).sum(axis=1)
        revenue = float(D.probabilities @ np.where(exactly_one, payments, 0.0))
        if revenue > best_revenue + REVENUE_TIE_TOL * max(1.0, best_revenue):
            best_revenue, best_local = revenue, list(local)
    return PricingResult(best_revenue, _full_vector(D, best_local))


def _merge_types(D: ValuationDistribution, additive: bool) -> tuple[list[np.ndarray], list[float], list[int]]:
    """Groups positive outcomes with identical valuations into LP types."""
    rows = D.singleton_matrix if additive else D.subset_values[:, 1:]
    index: dict[tuple, int] = {}
    vectors, probs, owner = [], [], []
    for row, p in zip(rows, D.probabilities.tolist()):
        key = tuple(row.tolist())
        if key not in index:
            index[key] = len(vectors)
            vectors.append(row)
            probs.append(0.0)
        probs[index[key]] += p
        owner.append(index[key])
    return vectors, probs, owner


def build_revenue_lp(vectors: Sequence[np.ndarray], probs: Sequence[float], additive: bool) -> LpProblem:
    """Builds the optimal-revenue LP over the given types.

    Each type owns a block of allocation variables followed by a payment.
    For additive buyers the allocation is one probability per item (boxed
    by 1); otherwise it is a weight per nonempty subset whose total is at
    most 1, the remainder being the empty allocation.
    """
    n_types = len(vectors)
    width = len(vectors[0])
    block = width + 1
    n_vars = n_types * block
    rows, rhs = [], []

    def utility_row(t: int, against: int) -> np.ndarray:
        row = np.zeros(n_vars)
        row[against * block : against * block + width] = -vectors[t]
        row[against * block + width] = 1.0
        return row

    for t in range(n_types):
        rows.append(utility_row(t, t))
        rhs.append(0.0)
    for t in range(n_types):
        own = utility_row(t, t)
        for other in range(n_types):
            if other != t:
                rows.append(own - utility_row(t, other))
                rhs.append(0.0)
    for t in range(n_types):
        if additive:
            for k in range(width):
                row = np.zeros(n_vars)
                row[t * block + k] = 1.0
                rows.append(row)
                rhs.append(1.0)
        else:
            row = np.zeros(n_vars)
            row[t * block : t * block + width] = 1.0
            rows.append(row)
            rhs.append(1.0)

    c = np.zeros(n_vars)
    for t, p in enumerate(probs):
        c[t * block + width] = p
    return LpProblem(c=c, a_ub=np.array(rows), b_ub=np.array(rhs))


def _lottery(D: ValuationDistribution, allocation: np.ndarray, additive: bool) -> dict[frozenset[int], float]:
    allocation = np.clip(allocation, 0.0, 1.0)
    items = D.items
    if additive:
        lottery = {}
        for mask in range(2 ** len(items)):
            p = 1.0
            for k in range(len(items)):
                p *= allocation[k] if mask >> k & 1 else 1.0 - allocation[k]
            if p > 0:
                lottery[subset_from_mask(items, mask)] = p
        return lottery
    lottery = {subset_from_mask(items, mask + 1): float(w) for mask, w in enumerate(allocation) if w > 0}
    rest = 1.0 - sum(lottery.values())
    if rest > 0:
        lottery[frozenset()] = rest
    total = sum(lottery.values())
    return {s: p / total for s, p in lottery.items()}


def optimal_rev(
    D: ValuationDistribution,
    *,
    variable_cap: Optional[int] = None,
    solver: Optional[DenseSimplexSolver] = None,
) -> OptimalRevenue:
    """Computes Rev(D), the optimal single-buyer revenue, by linear programming.

    Outcomes with identical valuations are merged into one type. The LP has
    IR and pairwise IC constraints; additive buyers use the per-item reduced
    allocation.

    Args:
        D (ValuationDistribution): The buyer's distribution.
        variable_cap (Optional[int]): Limit on types × 2^items; defaults to the configured cap.
        solver (Optional[DenseSimplexSolver]): Solver to use instead of the shared one.

    Returns:
        OptimalRevenue: The revenue, the induced menu (one option per type) and LP statistics.

    Raises:
        SupportSizeError: If the LP would exceed the variable cap.
        LpError: If the solver fails.
    """
    if not D.item_set or not D.support:
        return OptimalRevenue(0.0, Menu(), 0, None, 0, tuple(NULL_OPTION_INDEX for _ in D.support))
    additive = D.g.kind is ValuationKind.ADDITIVE
    vectors, probs, owner = _merge_types(D, additive)
    cap = get_lp_variable_cap() if variable_cap is None else variable_cap
    size = len(vectors) * 2 ** len(D.items)
    if size > cap:
        raise SupportSizeError("Revenue LP", size, cap)

    problem = build_revenue_lp(vectors, probs, additive)
    logger.debug(f"Revenue LP: {len(vectors)} types, {problem.n_variables} variables, {problem.n_constraints} rows.")
    solution = lp_solve(problem, solver=solver)

    block = len(vectors[0]) + 1
    options = []
    for t in range(len(vectors)):
        allocation = solution.x[t * block : t * block + block - 1]
        price = max(0.0, float(solution.x[t * block + block - 1]))
        options.append(MenuOption(lottery=_lottery(D, allocation, additive), price=price))
    return OptimalRevenue(
        revenue=solution.objective,
        menu=Menu(tuple(options)),
        iterations=solution.iterations,
        solution=solution,
        n_types=len(vectors),
        assignment=tuple(owner),
    )
