"""Sweeps δ over the two hard constructions.

For every δ the script builds the prophet lower-bound path and the OCRS
hard path, verifies each of their inequalities and logs the ratios.

Test Architecture:
- **Hard-Fail Behavior:** The script exits with status 1 on the first failed
  check, after logging it.

Usage:
1. Adjust `DELTAS` below.
2. Run this script from the project root.
"""

import logging
import math
import sys
from pathlib import Path

from mephew_python_commons import LoggerFactory

# Add the project's root directory to the Python path.
sys.path.append(str(Path(__file__).resolve().parents[2]))

from src.mrf_mechanisms.ocrs import hard_ocrs_parameters, max_alpha, verify_ocrs_separation
from src.mrf_mechanisms.prophet import hard_instance, verify_lower_bound

logger_factory = LoggerFactory(log_files_prefix="hard_instance_sweep")

logger = logger_factory.get_logger(__name__, level=logging.DEBUG)

# --- Test Configuration ---
DELTAS = (0.5, 1.0, 1.5, 2.0, 2.5)


def fail_on(reports, label: str):
    """Logs every report and exits on the first one that failed."""
    for report in reports:
        logger.debug(f"  {report.bound_name}: {report.lhs:.9g} <= {report.rhs:.9g}")
        if not report.passed:
            logger.error(f"{label}: {report.bound_name} failed with slack {report.slack:.3g}. Exiting.")
            sys.exit(1)


if __name__ == "__main__":
    for delta in DELTAS:
        logger.info(f"--- delta = {delta} ---")

        inst, cf = hard_instance(delta)
        fail_on(verify_lower_bound(inst, cf), f"prophet delta={delta}")
        logger.info(f"Prophet path: {cf.n + 1} vertices, E[max]/online = {cf.m1 / cf.r1:.6f}, target {(delta + 1) / 2}")

        p, q, n = hard_ocrs_parameters(delta)
        fail_on(verify_ocrs_separation(delta), f"OCRS delta={delta}")
        logger.info(f"OCRS path: {n + 1} elements, max alpha {max_alpha(p, q, n):.6g} <= {4 * math.exp(-delta):.6g}")

    logger.info("--- Hard Instance Sweep Complete ---")
