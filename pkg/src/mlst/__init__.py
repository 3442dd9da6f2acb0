"""Minimum labeling Steiner tree: LP relaxation, devolutionary GA, exact and
heuristic baselines, and a benchmark harness."""
from .devo import DevoConfig, Devolver
from .exact import branch_and_bound, brute_force
from .graph import (
    AugmentedGraph,
    InstanceError,
    InstanceSpec,
    LabeledGraph,
    SolutionViolation,
    SteinerTree,
    augment,
    generate_random,
    parse_instance,
    read_instance,
    validate_solution,
)
from .heuristics import mvca, pilot
from .model import LINK_AGGREGATED, LINK_PER_EDGE, build_relaxation, cutting_plane_solve

__version__ = "0.1.0"

__all__ = [
    "AugmentedGraph",
    "DevoConfig",
    "Devolver",
    "InstanceError",
    "InstanceSpec",
    "LINK_AGGREGATED",
    "LINK_PER_EDGE",
    "LabeledGraph",
    "SolutionViolation",
    "SteinerTree",
    "augment",
    "branch_and_bound",
    "brute_force",
    "build_relaxation",
    "cutting_plane_solve",
    "generate_random",
    "mvca",
    "parse_instance",
    "pilot",
    "read_instance",
    "validate_solution",
]
