"""Custom exceptions used within the library.

This module defines a hierarchy of exceptions for the failures that can occur
while building distributions, solving revenue LPs and constructing online
selection schemes. Plain argument-shape mistakes raise `ValueError` instead.
"""

from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from .lp import LpSolution


class MrfMechanismsError(Exception):
    """Base exception for every library-specific failure."""

    pass


class SupportSizeError(MrfMechanismsError):
    """Raised when an enumeration would exceed a configured size cap.

    Attributes:
        requested (int): The size that would have been enumerated.
        cap (int): The configured limit.
    """

    def __init__(self, what: str, requested: int, cap: int):
        """Initializes the SupportSizeError.

        Args:
            what (str): A short description of the enumerated object.
            requested (int): The size that would have been enumerated.
            cap (int): The configured limit.
        """
        self.requested = requested
        self.cap = cap
        super().__init__(f"{what} of size {requested} exceeds the cap of {cap}")


class ZeroProbabilityEventError(MrfMechanismsError):
    """Raised when conditioning on an event of probability zero."""

    pass


class ValuationTableError(MrfMechanismsError):
    """Raised when a valuation cannot evaluate a typed set.

    This covers a missing entry in a subadditive table, an unknown singleton
    and a typed set holding more than one type for the same item.
    """

    pass


class RhoUndefinedError(MrfMechanismsError):
    """Raised when every outcome has a zero denominator in the ρ statistic."""

    pass


class LpError(MrfMechanismsError):
    """Base exception for errors reported by the simplex solver.

    It encapsulates the `LpSolution` reached when the solver stopped, which
    carries the status, the iteration count and the measured residuals.

    Attributes:
        solution (LpSolution): The (partial) solution associated with the failure.
    """

    def __init__(self, solution: "LpSolution", message: Optional[str] = None):
        """Initializes the LpError.

        Args:
            solution (LpSolution): The solution associated with the exception.
            message (Optional[str]): An optional explanation.
        """
        self.solution = solution
        super().__init__(message or str(solution))


class LpInfeasibleError(LpError):
    """Raised when phase one proves that the constraints admit no point."""

    pass


class LpUnboundedError(LpError):
    """Raised when an entering column has no positive entry in phase two."""

    pass


class LpSolverError(LpError):
    """Raised when the pivot budget runs out, primal feasibility is lost or the dual certificate does not match."""

    pass


class SchemeInfeasibleError(MrfMechanismsError):
    """Raised when an adaptive OCRS would need a selection probability above one.

    Attributes:
        index (int): The element whose selection probability is infeasible.
        probability (float): The selection probability that was required.
    """

    def __init__(self, index: int, probability: float):
        """Initializes the SchemeInfeasibleError.

        Args:
            index (int): The offending element.
            probability (float): The required selection probability.
        """
        self.index = index
        self.probability = probability
        super().__init__(f"Element {index} would need selection probability {probability:.15g} > 1")


class NoValidHorizonError(MrfMechanismsError):
    """Raised when the prophet lower-bound construction admits no horizon.

    Attributes:
        q (float): The off-anchor transition probability that made it fail.
    """

    def __init__(self, delta: float, q: float):
        """Initializes the NoValidHorizonError.

        Args:
            delta (float): The requested edge magnitude.
            q (float): The derived off-anchor transition probability.
        """
        self.q = q
        super().__init__(
            f"No valid horizon for delta={delta!r}: 1/2 - q = {0.5 - q:.6g} must exceed 2q = {2 * q:.6g}"
        )


class InstanceFormatError(MrfMechanismsError):
    """Raised when an instance or menu document is malformed or has an unknown schema."""

    pass
