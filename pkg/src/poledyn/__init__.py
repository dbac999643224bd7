"""Dynamics of the rational maps f(x) = x - sum_i a_i / (x - b_i)."""

from .errors import (BracketFailure, BudgetExceeded, EpsilonTooLarge, InvariantViolation, PoleEvaluation,
                     PoledynError, PrecisionExhausted)
from .experiments import (ExperimentConfig, ExperimentReport, density_estimate, disjointness_sweep,
                          hitting_scaling_study, logsq_conjecture_probe)
from .intervals import (IntervalSet, MergeEvent, build_I0, glasser_measure_check, pairwise_disjoint,
                        preimage_interval_set, pullback)
from .mapcore import (Branch, MapSpec, branch_of, branches, epsilon0, eval_derivative, eval_map, load_map,
                      preimage_in_branch, preimages_all, validate_map_file)
from .orbit import (HitRecord, Orbit, escape_magnitude, first_hit, first_hit_adaptive, halving_time, itinerary,
                    itinerary_adaptive, iterate, shadow_verify, theta_estimate)
from .precision import Mode, PrecisionPolicy

__version__ = "0.1.0"

__all__ = [
    "BracketFailure", "Branch", "branch_of", "branches", "BudgetExceeded", "build_I0", "density_estimate",
    "disjointness_sweep", "epsilon0", "EpsilonTooLarge", "escape_magnitude", "eval_derivative", "eval_map",
    "ExperimentConfig", "ExperimentReport", "first_hit", "first_hit_adaptive", "glasser_measure_check",
    "halving_time", "HitRecord", "hitting_scaling_study", "IntervalSet", "InvariantViolation", "iterate",
    "itinerary", "itinerary_adaptive", "load_map", "logsq_conjecture_probe", "MapSpec", "MergeEvent", "Mode",
    "Orbit", "pairwise_disjoint", "PoledynError", "PoleEvaluation", "PrecisionExhausted", "PrecisionPolicy",
    "preimage_in_branch", "preimage_interval_set", "preimages_all", "pullback", "shadow_verify",
    "theta_estimate", "validate_map_file",
]
