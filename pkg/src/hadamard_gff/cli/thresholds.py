"""Pass/fail thresholds applied by ``run --check``.

This is the single table of acceptance thresholds; the acceptance tests
import it as well.
"""
from __future__ import annotations

from dataclasses import dataclass

__all__ = ["Threshold", "THRESHOLDS"]


@dataclass(frozen=True)
class Threshold:
    criterion: int
    label: str
    value: float


THRESHOLDS = {
    "gram_defect": Threshold(1, "gram_defect<=1e-9", 1e-9),
    "kernel_refinement": Threshold(2, "kernel_defect_decreases", 0.0),
    "lemma_exact": Threshold(3, "increment_residual<=1e-9", 1e-9),
    "lemma_kernel": Threshold(3, "increment_residual<=1e-8", 1e-8),
    "identity_defect": Threshold(4, "identity_defect<=1e-9", 1e-9),
    "identity_mc_se": Threshold(4, "random_walk_|z|<=3", 3.0),
    "covariance_se": Threshold(5, "covariance_|z|<=4", 4.0),
    "oracle_joint_se": Threshold(5, "oracle_joint_|z|<=5", 5.0),
    "green_rel": Threshold(6, "green_rel_error<=0.05", 0.05),
    "block_orthogonality": Threshold(7, "block_orthogonality==0", 0.0),
    "increment_z": Threshold(7, "increment_|z|<=3", 3.0),
    "increment_pass_rate": Threshold(7, "increment_pass_rate>=0.95", 0.95),
    "circle_variance_rel": Threshold(8, "circle_variance_rel<=0.10", 0.10),
    "circle_increment_z": Threshold(8, "circle_increment_|z|<=3", 3.0),
    "kappa_rel": Threshold(9, "kappa_rel<=0.10", 0.10),
    "time_change_rel": Threshold(9, "variance_vs_kappa_rel<=0.15", 0.15),
    "boundary_rate_rel": Threshold(10, "boundary_rate_rel<=0.15", 0.15),
    "routes_strict_rel": Threshold(11, "routes_rel<=0.05", 0.05),
    "routes_loose_rel": Threshold(11, "routes_rel<=0.10", 0.10),
}
