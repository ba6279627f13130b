"""Root parallelization: K independent trees from one state, then aggregation.

Each worker owns a private environment copy and a private random stream
derived from ``(master_seed, worker_index)``, so results do not depend on
whether workers run serially, in a process pool, or in any interleaving.
The only synchronization point is the join before aggregation.
"""
from __future__ import annotations

import time
from concurrent.futures import Executor
from dataclasses import dataclass

import numpy as np

from .aggregation import ActionStats, AggregationChoice, select_action
from .environments import Environment
from .mcts import SearchParams, SearchTree, root_action_stats, run_trial
from .mdp import ContractViolation, MdpConfig, StateVec, derive_rng

# Stream tag for aggregation-side randomness, disjoint from worker indices.
AGGREGATION_STREAM = 1_000_003


@dataclass(frozen=True)
class ParallelPlanSpec:
    """Worker count, per-tree search settings, and the aggregation strategy."""

    workers: int
    search: SearchParams
    strategy: AggregationChoice
    trials_per_worker: int | None = None

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.strategy.kind == "single_thread" and self.workers != 1:
            raise ValueError("the single_thread baseline requires exactly one worker")
        if self.trials_per_worker is not None and self.trials_per_worker < 1:
            raise ValueError("trials_per_worker must be positive")

    @property
    def effective_trials(self) -> int:
        return self.trials_per_worker if self.trials_per_worker is not None else self.search.trials


@dataclass
class ForestStats:
    """Root statistics of all K trees at one planning step."""

    per_tree: list[list[ActionStats]]
    wall_times: list[float]

    def __post_init__(self):
        if len(self.per_tree) != len(self.wall_times):
            raise ValueError("per_tree and wall_times must have equal length")

    @property
    def tree_count(self) -> int:
        return len(self.per_tree)

    def all_stats(self) -> list[ActionStats]:
        return [stat for tree_stats in self.per_tree for stat in tree_stats]


def _build_worker(
    env: Environment,
    params: SearchParams,
    mdp: MdpConfig,
    root_state: StateVec,
    master_seed: int,
    worker_index: int,
    trials: int,
) -> tuple[list[ActionStats], float]:
    rng = derive_rng(master_seed, worker_index)
    box = env.spec.action_box
    start = time.perf_counter()
    tree = SearchTree(root_state, mdp, box)
    for _ in range(trials):
        run_trial(tree, params, env, rng)
    elapsed = time.perf_counter() - start
    return root_action_stats(tree, worker_index), elapsed


def build_forest(
    root_state: StateVec,
    spec: ParallelPlanSpec,
    env: Environment,
    mdp: MdpConfig,
    master_seed: int,
    executor: Executor | None = None,
) -> ForestStats:
    """Build the K trees (serially or on the given executor) and collect stats."""
    trials = spec.effective_trials
    args = [
        (env, spec.search, mdp, root_state, master_seed, w, trials)
        for w in range(spec.workers)
    ]
    if executor is None or spec.workers == 1:
        results = [_build_worker(*a) for a in args]
    else:
        results = list(executor.map(_build_worker_star, args))
    return ForestStats(
        per_tree=[stats for stats, _ in results],
        wall_times=[wall for _, wall in results],
    )


def _build_worker_star(args) -> tuple[list[ActionStats], float]:
    return _build_worker(*args)


@dataclass(frozen=True)
class PlanStepResult:
    action: np.ndarray
    build_seconds: float
    inference_seconds: float
    forest: ForestStats


def plan_step(
    root_state: StateVec,
    spec: ParallelPlanSpec,
    env: Environment,
    mdp: MdpConfig,
    master_seed: int,
    executor: Executor | None = None,
) -> PlanStepResult:
    """One replanning step: build K trees, aggregate, return the chosen action.

    ``build_seconds`` covers tree construction including the join;
    ``inference_seconds`` covers only the aggregation call.
    """
    box = env.spec.action_box

    build_start = time.perf_counter()
    forest = build_forest(root_state, spec, env, mdp, master_seed, executor)
    build_seconds = time.perf_counter() - build_start

    agg_rng = derive_rng(master_seed, AGGREGATION_STREAM)
    infer_start = time.perf_counter()
    try:
        action = select_action(forest, spec.strategy, box, agg_rng)
    except Exception as exc:
        raise RuntimeError(
            f"aggregation strategy {spec.strategy.kind!r} failed: {exc}"
        ) from exc
    inference_seconds = time.perf_counter() - infer_start

    if not box.contains(action):
        raise ContractViolation(
            f"strategy {spec.strategy.kind!r} emitted an out-of-box action {action!r}"
        )
    return PlanStepResult(action, build_seconds, inference_seconds, forest)
