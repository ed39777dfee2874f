"""Fair minimum-load k-clustering.

Choose ``k`` centers and assign every point to one of them so that each
cluster's share of every group stays within given bounds, minimizing the
largest per-center sum of distances.
"""

__version__ = "0.1.0"

from .assignment import (
    FairnessInfeasibleError,
    budgeted_fair_assignment,
    fair_assignment,
    fair_kmedian_assignment,
    mlkc_assignment,
)
from .centers import CenterList, euclidean_candidate_centers, exhaustive_centers, metric_candidate_centers
from .core import (
    Assignment,
    Clustering,
    Facility,
    Instance,
    InstanceError,
    Point,
    assignment_cost,
    assignment_report,
    check_fairness,
    load_instance,
    read_instance,
)
from .estimator import FairMinLoadKClustering
from .oracle import brute_force_fair_assignment, brute_force_fair_kmedian, brute_force_fmlkc
from .solver import SolveConfig, SolveResult, solve_fmlkc

__all__ = [
    "Assignment",
    "CenterList",
    "Clustering",
    "Facility",
    "FairMinLoadKClustering",
    "FairnessInfeasibleError",
    "Instance",
    "InstanceError",
    "Point",
    "SolveConfig",
    "SolveResult",
    "assignment_cost",
    "assignment_report",
    "brute_force_fair_assignment",
    "brute_force_fair_kmedian",
    "brute_force_fmlkc",
    "budgeted_fair_assignment",
    "check_fairness",
    "euclidean_candidate_centers",
    "exhaustive_centers",
    "fair_assignment",
    "fair_kmedian_assignment",
    "load_instance",
    "metric_candidate_centers",
    "mlkc_assignment",
    "read_instance",
    "solve_fmlkc",
]
