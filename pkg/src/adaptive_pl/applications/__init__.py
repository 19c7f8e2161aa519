"""Problem builders: simplex benchmarks, SVM duals, network equilibrium, penalty decomposition."""
from .benchmark import BenchmarkSpec, build_benchmark, starting_point
from .network import (
    NetworkSpec,
    build_network_problem,
    equilibrium_report,
    parse_network,
    read_network,
    shortest_path_costs,
)
from .penalty import PenaltySpec, build_penalty_problem, penalty_continuation, tau_schedule
from .svm import SvmDualSpec, build_svm_dual, read_svm_csv

__all__ = [
    "BenchmarkSpec",
    "NetworkSpec",
    "PenaltySpec",
    "SvmDualSpec",
    "build_benchmark",
    "build_network_problem",
    "build_penalty_problem",
    "build_svm_dual",
    "equilibrium_report",
    "parse_network",
    "penalty_continuation",
    "read_network",
    "read_svm_csv",
    "shortest_path_costs",
    "starting_point",
    "tau_schedule",
]
