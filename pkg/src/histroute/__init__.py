"""Vehicle routing from historical plans via learned first-order transition matrices."""

from .evaluation import (EvaluationRecord, SplitConfig, arc_difference, evaluate,
                         evaluate_batch, evaluate_incremental, route_difference, summarize)
from .learner import (CostMatrix, DistanceProbabilityMatrix, FrequencyMatrix, Scheme,
                      TransitionMatrix, WeighingScheme, blend, build_frequency, build_transition,
                      distance_probabilities, instance_weight, jaccard, smooth_normalize,
                      to_cost_matrix)
from .model import (DEPOT, InstanceStream, RoutingPlan, StopUniverse, arcs_of, validate_plan)
from .solver import (CvrpInstance, SolverResult, brute_force_oracle, solve_exact,
                     solve_most_likely)
from .synthetic import SyntheticWorldConfig, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "EvaluationRecord", "SplitConfig", "arc_difference", "evaluate", "evaluate_batch",
    "evaluate_incremental", "route_difference", "summarize",
    "CostMatrix", "DistanceProbabilityMatrix", "FrequencyMatrix", "Scheme", "TransitionMatrix",
    "WeighingScheme", "blend", "build_frequency", "build_transition", "distance_probabilities",
    "instance_weight", "jaccard", "smooth_normalize", "to_cost_matrix",
    "DEPOT", "InstanceStream", "RoutingPlan", "StopUniverse", "arcs_of", "validate_plan",
    "CvrpInstance", "SolverResult", "brute_force_oracle", "solve_exact", "solve_most_likely",
    "SyntheticWorldConfig", "generate_synthetic",
]
