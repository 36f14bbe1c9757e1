"""Defines the static limits and tolerances used across the library.

Caps bound every exhaustive enumeration; tolerances fix how exact computations
are compared. The LP variable cap can be overridden from the environment.
"""

import os

#: Largest product support `joint_table` will materialize.
DEFAULT_SUPPORT_CAP = 10**6

#: Largest number of LP variables `optimal_rev` will build.
DEFAULT_LP_VARIABLE_CAP = 10**5

#: Environment variable overriding `DEFAULT_LP_VARIABLE_CAP`.
LP_VARIABLE_CAP_ENV = "MRF_MECHANISMS_LP_VARIABLE_CAP"

#: Complements with at most this many outcomes have all their subsets enumerated.
EXHAUSTIVE_SUBSET_LIMIT = 12

#: Number of random subsets drawn for larger complements.
SUBSET_SAMPLE_SIZE = 10_000

#: Absolute tolerance for probability normalization.
NORMALIZATION_TOL = 1e-12

#: Relative tolerance for derived quantities.
RELATIVE_TOL = 1e-9

#: Slack allowed when deciding whether a reported bound passes.
BOUND_TOL = 1e-7

#: Pivot and reduced-cost tolerance of the simplex solver.
LP_PIVOT_TOL = 1e-9

#: Maximum primal/dual residual accepted by the simplex certificate.
LP_FEASIBILITY_TOL = 1e-7

#: Maximum relative gap between primal and dual objectives.
LP_DUALITY_GAP_TOL = 1e-6

#: Pivots allowed per row plus column of the standard-form tableau.
LP_PIVOTS_PER_DIMENSION = 50

#: Ceiling on the size-scaled pivot budget.
DEFAULT_MAX_PIVOTS = 50_000

#: Ratios within this relative distance of the minimum tie in the ratio test.
LP_RATIO_TIE_TOL = 1e-12

#: Pivots between refactorizations of the tableau from the original rows.
LP_REFACTOR_INTERVAL = 50

#: Utilities closer than this are treated as a tie in buyer choice.
UTILITY_TIE_TOL = 1e-9

#: Largest product support the full-prefix online DP will handle.
ONLINE_DP_SUPPORT_CAP = 2**12

#: Slack on selection probabilities before an adaptive OCRS is declared infeasible.
SCHEME_TOL = 1e-12

#: How often a generator retries before giving up on a valid instance.
GENERATOR_MAX_RETRIES = 100


def get_lp_variable_cap() -> int:
    """Returns the LP variable cap, honouring `MRF_MECHANISMS_LP_VARIABLE_CAP`.

    Raises:
        ValueError: If the environment variable is set but not a positive integer.
    """
    raw = os.environ.get(LP_VARIABLE_CAP_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_LP_VARIABLE_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise ValueError(f"{LP_VARIABLE_CAP_ENV} must be an integer, got {raw!r}") from None
    if cap <= 0:
        raise ValueError(f"{LP_VARIABLE_CAP_ENV} must be positive, got {cap}")
    return cap
