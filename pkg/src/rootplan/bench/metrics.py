"""Aggregate metrics over episode records: step counts, success rates, and
mean-reciprocal-rank summaries across (task, trial-budget) cells."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .records import EpisodeRecord, group_by_cell

Z_95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class CellStats:
    """Mean step count for one (env, strategy, budget) cell with a normal CI."""

    mean: float
    std_error: float
    ci_low: float
    ci_high: float
    count: int
    transformed_mean: float  # plot constant minus the mean, so higher is better


def steps_stats(steps: Sequence[int], plot_constant: float) -> CellStats:
    values = np.asarray(steps, dtype=float)
    if values.size == 0:
        raise ValueError("cannot summarize an empty cell")
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0
    return CellStats(
        mean=mean,
        std_error=se,
        ci_low=mean - Z_95 * se,
        ci_high=mean + Z_95 * se,
        count=int(values.size),
        transformed_mean=plot_constant - mean,
    )


def steps_metric(
    records: Sequence[EpisodeRecord], plot_constants: dict[str, float]
) -> dict[tuple[str, str, int], CellStats]:
    """Per-cell step summaries; ``plot_constants`` maps env name to the
    constant subtracted for the higher-is-better transform (the episode cap)."""
    cells = group_by_cell(records)
    return {
        key: steps_stats([r.steps for r in cell], plot_constants[key[0]])
        for key, cell in cells.items()
    }


def success_rate(records: Sequence[EpisodeRecord]) -> dict[tuple[str, str, int], float]:
    """Fraction of successful episodes per cell. Reported without a CI."""
    cells = group_by_cell(records)
    return {
        key: sum(1 for r in cell if r.success) / len(cell) for key, cell in cells.items()
    }


def competition_ranks(scores: dict[str, float]) -> dict[str, int]:
    """Rank by descending score; ties share the better (minimum) rank."""
    ordered = sorted(scores.values(), reverse=True)
    return {name: 1 + ordered.index(score) for name, score in scores.items()}


@dataclass(frozen=True)
class RankTable:
    """Reciprocal ranks per cell plus per-task and overall MRR."""

    per_cell_rr: dict  # (task, cell_key) -> {strategy: reciprocal rank}
    per_task_mrr: dict  # task -> {strategy: mrr}
    overall_mrr: dict  # strategy -> mrr


def mrr(rank_inputs: dict) -> RankTable:
    """Mean reciprocal rank from per-cell scores.

    ``rank_inputs`` maps task name to ``{cell_key: {strategy: score}}`` with
    higher scores better. Every cell must rank the same strategy set.
    """
    strategy_set: set[str] | None = None
    per_cell_rr: dict = {}
    per_task_mrr: dict = {}
    for task, cells in rank_inputs.items():
        if not cells:
            raise ValueError(f"task {task!r} has no cells")
        task_rrs: dict[str, list[float]] = {}
        for cell_key, scores in cells.items():
            names = set(scores)
            if strategy_set is None:
                strategy_set = names
            elif names != strategy_set:
                raise ValueError(
                    f"inconsistent strategy sets across cells: {sorted(names)} vs "
                    f"{sorted(strategy_set)}"
                )
            ranks = competition_ranks(scores)
            rrs = {name: 1.0 / rank for name, rank in ranks.items()}
            per_cell_rr[(task, cell_key)] = rrs
            for name, rr in rrs.items():
                task_rrs.setdefault(name, []).append(rr)
        per_task_mrr[task] = {name: float(np.mean(v)) for name, v in task_rrs.items()}
    overall = {
        name: float(np.mean([per_task_mrr[task][name] for task in per_task_mrr]))
        for name in (strategy_set or set())
    }
    return RankTable(per_cell_rr=per_cell_rr, per_task_mrr=per_task_mrr, overall_mrr=overall)


def rank_inputs_from_records(
    records: Sequence[EpisodeRecord], metric: str = "steps"
) -> dict:
    """Build MRR inputs from records: cells keyed by trial budget per task.

    ``metric`` is ``steps`` (fewer is better) or ``success`` (rate, higher is
    better).
    """
    if metric not in ("steps", "success"):
        raise ValueError(f"unknown metric {metric!r}")
    cells = group_by_cell(records)
    inputs: dict = {}
    for (env, strategy, budget), cell in cells.items():
        score = (
            -float(np.mean([r.steps for r in cell]))
            if metric == "steps"
            else sum(1 for r in cell if r.success) / len(cell)
        )
        inputs.setdefault(env, {}).setdefault(budget, {})[strategy] = score
    return inputs
