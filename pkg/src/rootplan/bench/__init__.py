"""Benchmark harness: grid runner, metrics, plots, and the CLI."""

from .metrics import RankTable, mrr, rank_inputs_from_records, steps_metric, success_rate
from .records import EpisodeRecord, read_records, write_records
from .runner import (
    ExperimentGrid,
    calibrate_extra_trials,
    run_episode,
    run_grid,
    time_equalized_compare,
)

__all__ = [
    "EpisodeRecord",
    "ExperimentGrid",
    "RankTable",
    "calibrate_extra_trials",
    "mrr",
    "rank_inputs_from_records",
    "read_records",
    "run_episode",
    "run_grid",
    "steps_metric",
    "success_rate",
    "time_equalized_compare",
    "write_records",
]
