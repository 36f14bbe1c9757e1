"""Compares LP-optimal revenue with simple mechanisms on a random pool.

Test Architecture:
- **Hard-Fail Behavior:** A simple mechanism earning more than the LP optimum
  means the LP or a pricing routine is wrong; the script exits with status 1.

Usage:
1. Adjust the configuration block below.
2. Run this script from the project root.
"""

import logging
import sys
from pathlib import Path

from mephew_python_commons import LoggerFactory
from tqdm import tqdm

# Add the project's root directory to the Python path.
sys.path.append(str(Path(__file__).resolve().parents[2]))

from src.mrf_mechanisms.config import BOUND_TOL
from src.mrf_mechanisms.generator import buyer_class_for, generate_instance
from src.mrf_mechanisms.mechanisms import brev, optimal_rev, srev, srev_prime
from src.mrf_mechanisms.models import ExperimentConfig
from src.mrf_mechanisms.mrf import max_weighted_degree

logger_factory = LoggerFactory(log_files_prefix="revenue_gap")

logger = logger_factory.get_logger(__name__, level=logging.INFO)

# --- Test Configuration ---
CONFIG = ExperimentConfig(
    seed=1000,
    instance_count=200,
    n_range=(2, 3),
    support_range=(2, 3),
    potential_cap=0.5,
    buyer_class="all",
)


if __name__ == "__main__":
    worst_ratio, worst_id = 1.0, None
    for k in tqdm(range(CONFIG.instance_count), desc="revenue gap"):
        doc = generate_instance(CONFIG, CONFIG.seed + k, buyer_class=buyer_class_for(CONFIG, k))
        D = doc.valuation_distribution()
        rev = optimal_rev(D).revenue
        simple = max(srev(D).revenue, brev(D).revenue, srev_prime(D).revenue)

        if simple > rev + BOUND_TOL * max(1.0, rev):
            logger.error(f"{doc.instance_id}: simple revenue {simple!r} exceeds Rev {rev!r}. Exiting.")
            sys.exit(1)

        ratio = rev / simple if simple > 0 else 1.0
        logger.debug(f"{doc.instance_id}: Rev {rev:.6g}, simple {simple:.6g}, ratio {ratio:.4f}")
        if ratio > worst_ratio:
            worst_ratio, worst_id = ratio, doc.instance_id
            delta = max_weighted_degree(doc.mrf).delta
            logger.info(f"New largest gap {ratio:.4f} on {worst_id} ({doc.valuation.kind.value}, delta {delta:.3f})")

    logger.info(f"--- Revenue Gap Complete: largest Rev / simple = {worst_ratio:.4f} ({worst_id}) ---")
