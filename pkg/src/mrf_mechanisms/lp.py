"""A dense primal simplex solver with Bland's anti-cycling rule.

Problems are stated as

    maximize    c·x
    subject to  A_ub x ≤ b_ub,  A_eq x = b_eq,  x ≥ 0

and solved with a two-phase tableau method. Every optimal solution is
certified by a dual solution recomputed from the final basis; a mismatch
between the primal and dual objectives is reported as a solver error.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .config import (
    DEFAULT_MAX_PIVOTS,
    LP_DUALITY_GAP_TOL,
    LP_FEASIBILITY_TOL,
    LP_PIVOT_TOL,
    LP_PIVOTS_PER_DIMENSION,
    LP_RATIO_TIE_TOL,
    LP_REFACTOR_INTERVAL,
)
from .exceptions import LpInfeasibleError, LpSolverError, LpUnboundedError
from .utils import logger_factory


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"
    NUMERICAL = "numerical"


_STOP_REASONS = {
    LpStatus.INFEASIBLE: "infeasible",
    LpStatus.UNBOUNDED: "unbounded",
    LpStatus.ITERATION_LIMIT: "pivot budget exhausted",
    LpStatus.NUMERICAL: "primal feasibility lost",
}


def _as_matrix(a: Optional[np.ndarray], n: int) -> np.ndarray:
    if a is None:
        return np.zeros((0, n), dtype=float)
    return np.atleast_2d(np.asarray(a, dtype=float)).reshape(-1, n)


@dataclass(frozen=True, eq=False)
class LpProblem:
    """A linear program in inequality/equality form over nonnegative variables.

    Attributes:
        c (np.ndarray): Objective coefficients (maximized).
        a_ub (np.ndarray): Inequality matrix, one row per `≤` constraint.
        b_ub (np.ndarray): Inequality right-hand sides.
        a_eq (np.ndarray): Equality matrix.
        b_eq (np.ndarray): Equality right-hand sides.
        variable_names (tuple[str, ...]): Optional labels used in logs.
    """

    c: np.ndarray
    a_ub: Optional[np.ndarray] = None
    b_ub: Optional[np.ndarray] = None
    a_eq: Optional[np.ndarray] = None
    b_eq: Optional[np.ndarray] = None
    variable_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).ravel()
        n = c.size
        a_ub = _as_matrix(self.a_ub, n)
        a_eq = _as_matrix(self.a_eq, n)
        b_ub = np.zeros(0) if self.b_ub is None else np.asarray(self.b_ub, dtype=float).ravel()
        b_eq = np.zeros(0) if self.b_eq is None else np.asarray(self.b_eq, dtype=float).ravel()
        if a_ub.shape[0] != b_ub.size:
            raise ValueError(f"A_ub has {a_ub.shape[0]} rows but b_ub has {b_ub.size} entries.")
        if a_eq.shape[0] != b_eq.size:
            raise ValueError(f"A_eq has {a_eq.shape[0]} rows but b_eq has {b_eq.size} entries.")
        if self.variable_names and len(self.variable_names) != n:
            raise ValueError(f"Expected {n} variable names, got {len(self.variable_names)}.")
        for name, arr in (("c", c), ("A_ub", a_ub), ("b_ub", b_ub), ("A_eq", a_eq), ("b_eq", b_eq)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries.")
        for name, arr in (("c", c), ("a_ub", a_ub), ("b_ub", b_ub), ("a_eq", a_eq), ("b_eq", b_eq)):
            object.__setattr__(self, name, arr)

    @property
    def n_variables(self) -> int:
        return self.c.size

    @property
    def n_constraints(self) -> int:
        return self.b_ub.size + self.b_eq.size


@dataclass(frozen=True, eq=False)
class LpSolution:
    """The result of a simplex run, with its dual certificate.

    Attributes:
        status (LpStatus): How the run ended.
        x (np.ndarray): The primal point (the last basic solution for non-optimal runs).
        objective (float): c·x.
        dual_ub (np.ndarray): Multipliers of the inequality rows (nonnegative at optimality).
        dual_eq (np.ndarray): Multipliers of the equality rows.
        dual_objective (float): b_ub·y_ub + b_eq·y_eq.
        iterations (int): Pivots performed over both phases.
        primal_violation (float): Largest violated constraint or sign bound.
        dual_violation (float): Largest violated dual constraint.
    """

    status: LpStatus
    x: np.ndarray
    objective: float
    dual_ub: np.ndarray
    dual_eq: np.ndarray
    dual_objective: float
    iterations: int
    primal_violation: float
    dual_violation: float

    def __str__(self) -> str:
        return (
            f"LpSolution(status={self.status.value}, objective={self.objective:.12g}, "
            f"dual_objective={self.dual_objective:.12g}, iterations={self.iterations}, "
            f"primal_violation={self.primal_violation:.3g}, dual_violation={self.dual_violation:.3g})"
        )


class DenseSimplexSolver:
    """Two-phase dense tableau simplex using Bland's rule for both pivot choices.

    The entering column is the lowest-index column with a positive reduced
    cost. The leaving row attains the minimum ratio; among rows whose ratio
    equals it up to `LP_RATIO_TIE_TOL`, the one whose basic variable has the
    lowest index leaves. The rule never cycles, so degenerate LPs terminate,
    and runs are fully deterministic.

    Pivot elements smaller than `pivot_tol` relative to their column are
    skipped. The tableau is rebuilt from the original rows every
    `LP_REFACTOR_INTERVAL` pivots and before optimality is declared, and a
    basic solution that turns infeasible beyond `LP_FEASIBILITY_TOL` is
    reported as a numerical failure.
    """

    def __init__(
        self,
        *,
        max_pivots: Optional[int] = None,
        pivot_tol: float = LP_PIVOT_TOL,
        log_level: int = logging.INFO,
    ):
        """Initializes the solver.

        Args:
            max_pivots (Optional[int]): Pivot budget shared by both phases. None scales the budget
                with the problem: `LP_PIVOTS_PER_DIMENSION` per tableau row and column, at most
                `DEFAULT_MAX_PIVOTS`.
            pivot_tol (float): Entries smaller than this are treated as zero.
            log_level (int): The logging level for this solver's logger.
        """
        if max_pivots is not None and max_pivots <= 0:
            raise ValueError(f"max_pivots must be positive, got {max_pivots}")
        self._max_pivots = max_pivots
        self._tol = pivot_tol
        self._logger = logger_factory.get_logger(self.__class__.__name__, level=log_level)

    def pivot_budget(self, n_rows: int, n_columns: int) -> int:
        """Returns the pivot budget for a tableau with `n_rows` rows and `n_columns` columns."""
        if self._max_pivots is not None:
            return self._max_pivots
        return min(DEFAULT_MAX_PIVOTS, LP_PIVOTS_PER_DIMENSION * (n_rows + n_columns))

    def solve(self, problem: LpProblem) -> LpSolution:
        """Solves `problem` to optimality.

        Args:
            problem (LpProblem): The program.

        Returns:
            LpSolution: An optimal, certified solution.

        Raises:
            LpInfeasibleError: If no feasible point exists.
            LpUnboundedError: If the objective is unbounded above.
            LpSolverError: If the pivot budget runs out, feasibility is lost or the certificate fails.
        """
        n = problem.n_variables
        m_ub, m_eq = problem.b_ub.size, problem.b_eq.size
        m = m_ub + m_eq
        self._logger.debug(f"Solving LP with {n} variables, {m_ub} inequalities and {m_eq} equalities.")

        standard = np.zeros((m, n + m_ub), dtype=float)
        standard[:m_ub, :n] = problem.a_ub
        standard[:m_ub, n:] = np.eye(m_ub)
        standard[m_ub:, :n] = problem.a_eq
        rhs = np.concatenate([problem.b_ub, problem.b_eq])
        sign = np.where(rhs < 0, -1.0, 1.0)
        standard *= sign[:, None]
        rhs = rhs * sign
        n_struct = n + m_ub

        needs_artificial = [r >= m_ub or sign[r] < 0 for r in range(m)]
        artificial_rows = [r for r in range(m) if needs_artificial[r]]
        tableau = np.zeros((m, n_struct + len(artificial_rows) + 1), dtype=float)
        tableau[:, :n_struct] = standard
        tableau[:, -1] = rhs
        basis = np.empty(m, dtype=np.int64)
        for r in range(m):
            basis[r] = n + r
        for k, r in enumerate(artificial_rows):
            tableau[r, n_struct + k] = 1.0
            basis[r] = n_struct + k

        budget = self.pivot_budget(m, n_struct)
        pivots = 0
        rows = np.arange(m)
        if artificial_rows:
            phase_one_cost = np.zeros(tableau.shape[1] - 1)
            phase_one_cost[n_struct:] = -1.0
            status, pivots = self._optimize(
                tableau, basis, tableau.copy(), phase_one_cost, tableau.shape[1] - 1, pivots, budget
            )
            if status is not LpStatus.OPTIMAL:
                partial = self._partial(problem, tableau, basis, status, pivots)
                raise LpSolverError(partial, f"Phase one stopped: {_STOP_REASONS[status]}.")
            infeasibility = float(tableau[basis >= n_struct, -1].sum())
            if infeasibility > LP_FEASIBILITY_TOL * max(1.0, float(np.abs(rhs).max(initial=0.0))):
                raise LpInfeasibleError(
                    self._partial(problem, tableau, basis, LpStatus.INFEASIBLE, pivots),
                    f"Phase one ended with artificial mass {infeasibility:.3g}.",
                )
            keep = np.ones(m, dtype=bool)
            for r in range(m):
                if basis[r] < n_struct:
                    continue
                candidates = np.flatnonzero(np.abs(tableau[r, :n_struct]) > self._tol)
                if candidates.size:
                    self._pivot(tableau, basis, r, int(candidates[0]))
                    pivots += 1
                else:
                    keep[r] = False
            if not keep.all():
                self._logger.debug(f"Dropping {int((~keep).sum())} redundant equality rows.")
            tableau = np.hstack([tableau[keep, :n_struct], tableau[keep, -1:]])
            basis = basis[keep]
            rows = rows[keep]

        original = np.hstack([standard[rows], rhs[rows, None]])
        cost = np.zeros(n_struct)
        cost[:n] = problem.c
        status, pivots = self._optimize(tableau, basis, original, cost, n_struct, pivots, budget)
        if status is LpStatus.UNBOUNDED:
            partial = self._partial(problem, tableau, basis, status, pivots)
            raise LpUnboundedError(partial, "The objective is unbounded.")
        if status is not LpStatus.OPTIMAL:
            partial = self._partial(problem, tableau, basis, status, pivots)
            raise LpSolverError(partial, f"Phase two stopped: {_STOP_REASONS[status]}.")

        solution = self._certify(problem, standard, sign, rows, tableau, basis, pivots)
        self._logger.debug(f"LP solved in {pivots} pivots, objective {solution.objective:.12g}.")
        return solution

    def _optimize(
        self,
        tableau: np.ndarray,
        basis: np.ndarray,
        original: np.ndarray,
        cost: np.ndarray,
        n_cols: int,
        pivots: int,
        budget: int,
    ) -> tuple[LpStatus, int]:
        """Runs Bland's rule on `tableau` in place.

        `original` holds the rows the tableau was derived from, in the same
        column layout, and is used to rebuild the tableau from the basis.
        """
        floor = -LP_FEASIBILITY_TOL * max(1.0, float(np.abs(original[:, -1]).max(initial=0.0)))
        reduced = self._refactor(tableau, basis, original, cost)
        since_refactor = 0
        while True:
            entering = np.flatnonzero(reduced[:n_cols] > self._tol)
            if entering.size == 0:
                if since_refactor == 0:
                    return LpStatus.OPTIMAL, pivots
                reduced, since_refactor = self._refactor(tableau, basis, original, cost), 0
                continue
            if pivots >= budget:
                return LpStatus.ITERATION_LIMIT, pivots
            j = int(entering[0])
            column = tableau[:, j]
            positive = np.flatnonzero(column > self._tol * max(1.0, float(np.abs(column).max(initial=0.0))))
            if positive.size == 0:
                if since_refactor == 0:
                    return LpStatus.UNBOUNDED, pivots
                reduced, since_refactor = self._refactor(tableau, basis, original, cost), 0
                continue
            ratios = np.maximum(tableau[positive, -1], 0.0) / column[positive]
            best = float(ratios.min())
            tied = positive[ratios <= best + LP_RATIO_TIE_TOL * max(1.0, best)]
            r = int(tied[np.argmin(basis[tied])])
            self._pivot(tableau, basis, r, j)
            reduced -= reduced[j] * tableau[r, :-1]
            reduced[j] = 0.0
            pivots += 1
            since_refactor += 1
            infeasible = tableau[:, -1].min(initial=0.0) < floor
            if infeasible or since_refactor >= LP_REFACTOR_INTERVAL:
                reduced, since_refactor = self._refactor(tableau, basis, original, cost), 0
                if tableau[:, -1].min(initial=0.0) < floor:
                    self._logger.warning(
                        f"Basic solution infeasible after {pivots} pivots "
                        f"(smallest right-hand side {tableau[:, -1].min():.3g})."
                    )
                    return LpStatus.NUMERICAL, pivots

    def _refactor(self, tableau: np.ndarray, basis: np.ndarray, original: np.ndarray, cost: np.ndarray) -> np.ndarray:
        """Rebuilds `tableau` as B⁻¹·original for the current basis and returns fresh reduced costs."""
        if basis.size:
            try:
                tableau[:] = np.linalg.solve(original[:, basis], original)
            except np.linalg.LinAlgError:
                self._logger.warning("Basis matrix is singular; keeping the updated tableau.")
            else:
                tableau[:, basis] = np.eye(basis.size)
                rhs = tableau[:, -1]
                rhs[(rhs < 0) & (rhs > -LP_PIVOT_TOL)] = 0.0
        return cost - cost[basis] @ tableau[:, :-1]

    @staticmethod
    def _pivot(tableau: np.ndarray, basis: np.ndarray, r: int, j: int):
        tableau[r] /= tableau[r, j]
        factors = tableau[:, j].copy()
        factors[r] = 0.0
        tableau -= np.outer(factors, tableau[r])
        tableau[:, j] = 0.0
        tableau[r, j] = 1.0
        rhs = tableau[:, -1]
        rhs[(rhs < 0) & (rhs > -LP_PIVOT_TOL)] = 0.0
        basis[r] = j

    @staticmethod
    def _basic_point(problem: LpProblem, tableau: np.ndarray, basis: np.ndarray) -> np.ndarray:
        x = np.zeros(problem.n_variables)
        for r, j in enumerate(basis):
            if j < problem.n_variables:
                x[j] = tableau[r, -1]
        return x

    def _partial(self, problem, tableau, basis, status, pivots) -> LpSolution:
        x = self._basic_point(problem, tableau, basis)
        return LpSolution(
            status=status,
            x=x,
            objective=float(problem.c @ x),
            dual_ub=np.zeros(problem.b_ub.size),
            dual_eq=np.zeros(problem.b_eq.size),
            dual_objective=float("nan"),
            iterations=pivots,
            primal_violation=_primal_violation(problem, x),
            dual_violation=float("nan"),
        )

    def _certify(self, problem, standard, sign, rows, tableau, basis, pivots) -> LpSolution:
        n = problem.n_variables
        x = self._basic_point(problem, tableau, basis)
        cost = np.zeros(standard.shape[1])
        cost[:n] = problem.c
        y = np.zeros(standard.shape[0])
        if rows.size:
            basis_matrix = standard[rows][:, basis]
            try:
                y[rows] = np.linalg.solve(basis_matrix.T, cost[basis])
            except np.linalg.LinAlgError:
                y[rows] = np.linalg.lstsq(basis_matrix.T, cost[basis], rcond=None)[0]
        y = y * sign
        dual_ub, dual_eq = y[: problem.b_ub.size], y[problem.b_ub.size :]

        objective = float(problem.c @ x)
        dual_objective = float(problem.b_ub @ dual_ub + problem.b_eq @ dual_eq)
        slack = problem.c - problem.a_ub.T @ dual_ub - problem.a_eq.T @ dual_eq
        dual_violation = max(0.0, float(slack.max(initial=0.0)), float((-dual_ub).max(initial=0.0)))
        solution = LpSolution(
            status=LpStatus.OPTIMAL,
            x=x,
            objective=objective,
            dual_ub=dual_ub,
            dual_eq=dual_eq,
            dual_objective=dual_objective,
            iterations=pivots,
            primal_violation=_primal_violation(problem, x),
            dual_violation=dual_violation,
        )

        scale = max(
            1.0,
            float(np.abs(problem.c).max(initial=0.0)),
            float(np.abs(problem.b_ub).max(initial=0.0)),
            float(np.abs(problem.b_eq).max(initial=0.0)),
        )
        if solution.primal_violation > LP_FEASIBILITY_TOL * scale or dual_violation > LP_FEASIBILITY_TOL * scale:
            raise LpSolverError(solution, f"Residuals too large: {solution}")
        if abs(objective - dual_objective) > LP_DUALITY_GAP_TOL * max(1.0, abs(objective)):
            raise LpSolverError(solution, f"Primal and dual objectives disagree: {solution}")
        return solution


def _primal_violation(problem: LpProblem, x: np.ndarray) -> float:
    violations = [0.0, float((-x).max(initial=0.0))]
    if problem.b_ub.size:
        violations.append(float((problem.a_ub @ x - problem.b_ub).max()))
    if problem.b_eq.size:
        violations.append(float(np.abs(problem.a_eq @ x - problem.b_eq).max()))
    return max(violations)


_default_solver: Optional[DenseSimplexSolver] = None


def lp_solve(problem: LpProblem, *, solver: Optional[DenseSimplexSolver] = None) -> LpSolution:
    """Solves `problem` with `solver`, or with a shared default solver.

    Raises:
        LpInfeasibleError: If no feasible point exists.
        LpUnboundedError: If the objective is unbounded above.
        LpSolverError: If the pivot budget runs out, feasibility is lost or the certificate fails.
    """
    global _default_solver
    if solver is None:
        if _default_solver is None:
            _default_solver = DenseSimplexSolver()
        solver = _default_solver
    return solver.solve(problem)
