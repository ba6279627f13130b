"""Episode and grid execution.

Every (env, strategy, budget, seed) cell gets an episode master seed derived
from stable identifiers, so results are independent of grid composition and
re-runs with the same master seed reproduce the metric columns byte for byte.
Grid cells execute sequentially; within a cell the K tree workers may run on
a process pool.
"""
from __future__ import annotations

import sys
import time
import zlib
from concurrent.futures import Executor, ProcessPoolExecutor
from contextlib import nullcontext
from dataclasses import dataclass, replace

import numpy as np

from ..aggregation import AggregationChoice
from ..config import ConfigError, Preset, load_preset
from ..mdp import derive_rng, derive_seed, discounted_return
from ..parallel import ParallelPlanSpec, plan_step
from .records import EpisodeRecord, RecordWriter

ENV_STREAM = 1
PLAN_STREAM = 2


@dataclass(frozen=True)
class ExperimentGrid:
    """Cross product of environments, strategies, trial budgets, and seeds."""

    env_names: list
    strategies: list
    trial_budgets: list
    seeds: list
    workers: int = 8

    def __post_init__(self):
        if not (self.env_names and self.strategies and self.trial_budgets and self.seeds):
            raise ConfigError("grid lists must be nonempty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")


def _strategy_kind(strategy) -> str:
    return strategy.kind if isinstance(strategy, AggregationChoice) else str(strategy)


def episode_master_seed(master_seed: int, env: str, strategy: str, budget: int, seed: int) -> int:
    """Stable per-cell master seed from the cell's identifiers."""
    return derive_seed(
        master_seed,
        zlib.crc32(env.encode()),
        zlib.crc32(strategy.encode()),
        budget,
        seed,
    )


def run_episode(
    preset: Preset,
    strategy,
    budget: int,
    seed: int,
    workers: int,
    episode_seed: int,
    executor: Executor | None = None,
    extra_trials: int = 0,
) -> EpisodeRecord:
    """Plan and execute one full episode.

    ``strategy`` is a kind string (resolved against the preset) or an explicit
    AggregationChoice. ``extra_trials`` adds per-worker trials on top of the
    budget (used by the time-equalized comparison); the recorded trial_budget
    stays the nominal one.
    """
    kind = _strategy_kind(strategy)
    choice = strategy if isinstance(strategy, AggregationChoice) else preset.strategy_choice(kind, budget)
    env = preset.build_environment()
    mdp = preset.mdp_config(env)
    spec = ParallelPlanSpec(
        workers=1 if kind == "single_thread" else workers,
        search=preset.search_params(budget + extra_trials),
        strategy=choice,
    )

    env_rng = derive_rng(episode_seed, ENV_STREAM)
    state = env.initial_state(env_rng)
    rewards: list[float] = []
    inference = 0.0
    steps = 0
    success = False

    start = time.perf_counter()
    for t in range(mdp.max_episode_steps):
        step_seed = derive_seed(episode_seed, PLAN_STREAM, t)
        result = plan_step(state, spec, env, mdp, step_seed, executor)
        inference += result.inference_seconds
        outcome = env.step(state, result.action, env_rng)
        rewards.append(outcome.reward)
        state = outcome.next_state
        steps += 1
        if outcome.terminal:
            success = True
            break
    total = time.perf_counter() - start

    return EpisodeRecord(
        env=preset.env_name,
        strategy=kind,
        trial_budget=budget,
        seed=seed,
        steps=steps,
        success=success,
        final_return=discounted_return(rewards, mdp.gamma),
        inference_seconds=inference,
        total_seconds=max(total, inference),
        delta_trials=extra_trials,
    )


def resolve_presets(env_names, overrides: dict | None = None) -> dict[str, Preset]:
    """Load and override presets for every environment, failing before any run."""
    presets = {}
    for name in env_names:
        preset = load_preset(name)
        if overrides:
            preset = preset.updated(overrides)
        preset.build_environment()  # surfaces unknown-env and bad-param errors now
        presets[name] = preset
    return presets


def _pool(workers: int, executor_mode: str):
    if executor_mode == "process" and workers > 1:
        import os

        return ProcessPoolExecutor(max_workers=min(workers, os.cpu_count() or 1))
    return nullcontext(None)


def run_grid(
    grid: ExperimentGrid,
    out_path,
    master_seed: int = 0,
    presets: dict[str, Preset] | None = None,
    executor_mode: str = "serial",
    progress: bool = True,
) -> list[EpisodeRecord]:
    """Run every grid cell, streaming records to ``out_path`` as they finish."""
    presets = presets if presets is not None else resolve_presets(grid.env_names)
    for name in grid.env_names:
        if name not in presets:
            raise ConfigError(f"no preset available for environment {name!r}")
        for strategy in grid.strategies:
            if isinstance(strategy, str):
                presets[name].strategy_choice(strategy, grid.trial_budgets[0])

    records = []
    total_cells = (
        len(grid.env_names) * len(grid.strategies) * len(grid.trial_budgets) * len(grid.seeds)
    )
    done = 0
    with _pool(grid.workers, executor_mode) as pool, RecordWriter(out_path) as writer:
        for env_name in grid.env_names:
            preset = presets[env_name]
            for strategy in grid.strategies:
                kind = _strategy_kind(strategy)
                for budget in grid.trial_budgets:
                    for seed in grid.seeds:
                        episode_seed = episode_master_seed(
                            master_seed, env_name, kind, budget, seed
                        )
                        record = run_episode(
                            preset, strategy, budget, seed, grid.workers, episode_seed, pool
                        )
                        record = replace(record, delta_trials=None)
                        writer.write(record)
                        records.append(record)
                        done += 1
                        if progress:
                            print(
                                f"[{done}/{total_cells}] {env_name} {kind} "
                                f"budget={budget} seed={seed} steps={record.steps} "
                                f"success={record.success}",
                                file=sys.stderr,
                                flush=True,
                            )
    return records


@dataclass(frozen=True)
class TrialRateCalibration:
    """Measured per-worker trial throughput and aggregation cost."""

    trials_per_second: float
    mean_inference_seconds: float
    delta_trials: int


def calibrate_extra_trials(
    preset: Preset,
    budget: int,
    workers: int,
    master_seed: int = 0,
    warmup_steps: int = 3,
    executor: Executor | None = None,
) -> TrialRateCalibration:
    """Estimate how many extra per-worker trials one aggregation call buys.

    Runs a few planning steps with the GP strategy, measures per-worker trial
    throughput from the per-tree wall times, and converts the mean aggregation
    time into whole trials per worker.
    """
    env = preset.build_environment()
    mdp = preset.mdp_config(env)
    spec = ParallelPlanSpec(
        workers=workers,
        search=preset.search_params(budget),
        strategy=preset.strategy_choice("gpr2p", budget),
    )
    rng = derive_rng(master_seed, 97)
    state = env.initial_state(rng)
    total_trials = 0
    total_build_cpu = 0.0
    inference_times = []
    for t in range(warmup_steps):
        result = plan_step(state, spec, env, mdp, derive_seed(master_seed, 98, t), executor)
        total_trials += sum(sum(s.visits for s in tree) for tree in result.forest.per_tree)
        total_build_cpu += sum(result.forest.wall_times)
        inference_times.append(result.inference_seconds)
        outcome = env.step(state, result.action, rng)
        if outcome.terminal:
            state = env.initial_state(rng)
        else:
            state = outcome.next_state
    if total_build_cpu <= 0:
        raise RuntimeError("calibration warmup measured no tree-build time")
    per_worker_rate = total_trials / workers / (total_build_cpu / workers)
    mean_inference = float(np.mean(inference_times))
    delta = int(round(mean_inference * per_worker_rate))
    return TrialRateCalibration(per_worker_rate, mean_inference, max(delta, 0))


def time_equalized_compare(
    env_name: str,
    budgets,
    seeds,
    out_path,
    workers: int = 8,
    master_seed: int = 0,
    preset: Preset | None = None,
    executor_mode: str = "serial",
    progress: bool = True,
) -> list[EpisodeRecord]:
    """GP aggregation at budget b versus kernel merge at budget b + delta.

    Delta converts the GP strategy's measured aggregation time into extra
    per-worker trials granted to the merge baseline.
    """
    preset = preset if preset is not None else load_preset(env_name)
    records = []
    with _pool(workers, executor_mode) as pool, RecordWriter(out_path, with_delta=True) as writer:
        for budget in budgets:
            calibration = calibrate_extra_trials(
                preset, budget, workers, master_seed, executor=pool
            )
            delta = calibration.delta_trials
            if progress:
                print(
                    f"time-compare {env_name} budget={budget}: delta_trials={delta} "
                    f"(rate={calibration.trials_per_second:.1f}/s, "
                    f"inference={calibration.mean_inference_seconds * 1e3:.2f} ms)",
                    file=sys.stderr,
                    flush=True,
                )
            for kind, extra in (("gpr2p", 0), ("similarity_merge", delta)):
                for seed in seeds:
                    episode_seed = episode_master_seed(master_seed, env_name, kind, budget, seed)
                    record = run_episode(
                        preset, kind, budget, seed, workers, episode_seed, pool, extra_trials=extra
                    )
                    writer.write(record)
                    records.append(record)
                    if progress:
                        print(
                            f"time-compare {env_name} {kind} budget={budget} seed={seed} "
                            f"steps={record.steps}",
                            file=sys.stderr,
                            flush=True,
                        )
    return records
