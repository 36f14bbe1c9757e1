"""Exact verification of simple mechanisms and online selection under MRF correlations.

Every quantity is computed exactly on small finite instances: joint tables
of Markov random fields by enumeration, optimal revenue by linear
programming, and online policies by dynamic programming.

Key Components:
- Distributions:
    - Mrf, JointTable: Type distributions and their exact joint tables.
    - SetValuation, ValuationDistribution: Buyer valuations over typed item sets.
- Mechanisms:
    - srev, brev, srev_prime: Separate, bundle and one-item-sold pricing.
    - optimal_rev: LP-optimal single-buyer revenue and its menu.
- Online selection:
    - ProphetInstance, geometric_policy, optimal_online: Prophet inequalities.
    - OcrsInstance, adaptive_scheme: Online contention resolution.
- Verification:
    - BoundReport: A checked inequality lhs ≤ rhs.
    - SuiteRunner: Runs checks over instance pools.
- Exceptions:
    - MrfMechanismsError: The base of every library error.
"""

from .exceptions import (
    InstanceFormatError,
    LpError,
    MrfMechanismsError,
    NoValidHorizonError,
    SchemeInfeasibleError,
    SupportSizeError,
)
from .instance_io import InstanceDocument, read_instance, write_instance
from .mechanisms import Menu, brev, optimal_rev, srev, srev_prime
from .models import BoundReport, ExperimentConfig, ResultRow
from .mrf import JointTable, Mrf, joint_table, max_weighted_degree
from .ocrs import OcrsInstance, adaptive_scheme, selectability
from .prophet import ProphetInstance, expected_max, optimal_online, geometric_policy
from .suite import SuiteRunner
from .valuation import SetValuation, ValuationDistribution, ValuationKind

__all__ = [
    "Mrf",
    "JointTable",
    "joint_table",
    "max_weighted_degree",
    "SetValuation",
    "ValuationDistribution",
    "ValuationKind",
    "Menu",
    "srev",
    "brev",
    "srev_prime",
    "optimal_rev",
    "ProphetInstance",
    "expected_max",
    "geometric_policy",
    "optimal_online",
    "OcrsInstance",
    "adaptive_scheme",
    "selectability",
    "BoundReport",
    "ExperimentConfig",
    "ResultRow",
    "SuiteRunner",
    "InstanceDocument",
    "read_instance",
    "write_instance",
    "MrfMechanismsError",
    "SupportSizeError",
    "LpError",
    "SchemeInfeasibleError",
    "NoValidHorizonError",
    "InstanceFormatError",
]
