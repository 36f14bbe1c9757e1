"""A collection of low-level, reusable utilities.

This module provides the shared logger factory, a millisecond timestamp used
for suite timings, and small helpers for enumerating item subsets in a fixed
(bitmask) order.
"""

import time
from itertools import combinations
from typing import Iterable, Iterator

from mephew_python_commons import LoggerFactory

logger_factory = LoggerFactory(
    log_files_prefix="mrf_mechanisms",
)


def get_milliseconds() -> int:
    """Returns the current system time as an integer number of milliseconds.

    Returns:
        int: The current time in milliseconds since the Epoch.
    """
    return int(round(time.time() * 1000))


def subset_from_mask(items: tuple[int, ...], mask: int) -> frozenset[int]:
    """Decodes a bitmask over `items` into the subset it selects.

    Bit `k` of `mask` selects `items[k]`.

    Args:
        items (tuple[int, ...]): The ordered items the mask refers to.
        mask (int): The bitmask.

    Returns:
        frozenset[int]: The selected items.
    """
    return frozenset(item for k, item in enumerate(items) if mask >> k & 1)


def all_subsets(items: Iterable[int]) -> Iterator[frozenset[int]]:
    """Yields every subset of `items`, smallest first, lexicographic within a size."""
    ordered = tuple(sorted(items))
    for size in range(len(ordered) + 1):
        for combo in combinations(ordered, size):
            yield frozenset(combo)


def format_float(value: float) -> str:
    """Formats a float for CSV output.

    `repr` is the shortest string that round-trips, so reruns produce
    byte-identical files.
    """
    return repr(float(value))
