"""Root-parallel MCTS for continuous action spaces with pluggable aggregation."""

from .aggregation import (
    ActionStats,
    AggregationChoice,
    select_action,
    select_gpr2p,
    select_max,
    select_most_visited,
    select_similarity_merge,
    select_similarity_vote,
    similarity_matrix,
)
from .config import Preset, load_preset, parse_config_text
from .environments import EnvSpec, Environment, ForceField, make_environment
from .gp import KernelParams, RbfGaussianProcessRegressor, rbf_kernel
from .mcts import SearchParams, SearchTree, build_tree, root_action_stats, run_trial, uct_score, widening_allowance
from .mdp import ActionBox, MdpConfig, StateVec, TransitionOutcome, derive_rng, derive_seed, discounted_return
from .parallel import ForestStats, ParallelPlanSpec, PlanStepResult, build_forest, plan_step

__version__ = "0.1.0"

__all__ = [
    "ActionBox",
    "ActionStats",
    "AggregationChoice",
    "EnvSpec",
    "Environment",
    "ForceField",
    "ForestStats",
    "KernelParams",
    "MdpConfig",
    "ParallelPlanSpec",
    "PlanStepResult",
    "Preset",
    "RbfGaussianProcessRegressor",
    "SearchParams",
    "SearchTree",
    "StateVec",
    "TransitionOutcome",
    "build_forest",
    "build_tree",
    "derive_rng",
    "derive_seed",
    "discounted_return",
    "load_preset",
    "make_environment",
    "parse_config_text",
    "plan_step",
    "rbf_kernel",
    "root_action_stats",
    "run_trial",
    "select_action",
    "select_gpr2p",
    "select_max",
    "select_most_visited",
    "select_similarity_merge",
    "select_similarity_vote",
    "similarity_matrix",
    "uct_score",
    "widening_allowance",
]
