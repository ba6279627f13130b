"""Episode records and their CSV serialization.

Column order is fixed:
``env,strategy,trial_budget,seed,steps,success,final_return,inference_seconds,total_seconds``
with an optional trailing ``delta_trials`` column for time-equalized runs. A
``#`` comment line documenting the columns precedes the header.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

COLUMNS = (
    "env",
    "strategy",
    "trial_budget",
    "seed",
    "steps",
    "success",
    "final_return",
    "inference_seconds",
    "total_seconds",
)
METRIC_COLUMNS = ("env", "strategy", "trial_budget", "seed", "steps", "success", "final_return")


@dataclass(frozen=True)
class EpisodeRecord:
    """Outcome of one planned episode."""

    env: str
    strategy: str
    trial_budget: int
    seed: int
    steps: int
    success: bool
    final_return: float
    inference_seconds: float
    total_seconds: float
    delta_trials: int | None = None

    def __post_init__(self):
        if self.inference_seconds > self.total_seconds:
            raise ValueError("inference_seconds cannot exceed total_seconds")

    def row(self, with_delta: bool = False) -> list[str]:
        values = [
            self.env,
            self.strategy,
            str(self.trial_budget),
            str(self.seed),
            str(self.steps),
            "true" if self.success else "false",
            repr(self.final_return),
            repr(self.inference_seconds),
            repr(self.total_seconds),
        ]
        if with_delta:
            values.append(str(self.delta_trials if self.delta_trials is not None else 0))
        return values


class RecordWriter:
    """Incremental CSV writer that flushes after every record."""

    def __init__(self, path: str | Path, with_delta: bool = False):
        self.path = Path(path)
        self.with_delta = with_delta
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._writer = csv.writer(self._fh)
        columns = COLUMNS + (("delta_trials",) if with_delta else ())
        self._fh.write("# one row per episode; columns: " + ",".join(columns) + "\n")
        self._writer.writerow(columns)
        self._fh.flush()

    def write(self, record: EpisodeRecord) -> None:
        self._writer.writerow(record.row(self.with_delta))
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_records(
    records: Iterable[EpisodeRecord], path: str | Path, with_delta: bool = False
) -> None:
    with RecordWriter(path, with_delta) as writer:
        for record in records:
            writer.write(record)


def read_records(path: str | Path) -> list[EpisodeRecord]:
    records = []
    with open(path, newline="") as fh:
        rows = (row for row in csv.reader(fh) if row and not row[0].startswith("#"))
        header = next(rows, None)
        if header is None:
            raise ValueError(f"{path}: empty results file")
        if tuple(header[: len(COLUMNS)]) != COLUMNS:
            raise ValueError(f"{path}: unexpected header {header!r}")
        has_delta = len(header) > len(COLUMNS)
        for row in rows:
            records.append(
                EpisodeRecord(
                    env=row[0],
                    strategy=row[1],
                    trial_budget=int(row[2]),
                    seed=int(row[3]),
                    steps=int(row[4]),
                    success=row[5] == "true",
                    final_return=float(row[6]),
                    inference_seconds=float(row[7]),
                    total_seconds=float(row[8]),
                    delta_trials=int(row[9]) if has_delta else None,
                )
            )
    return records


def group_by_cell(
    records: Sequence[EpisodeRecord],
) -> dict[tuple[str, str, int], list[EpisodeRecord]]:
    """Group records by (env, strategy, trial_budget)."""
    cells: dict[tuple[str, str, int], list[EpisodeRecord]] = {}
    for record in records:
        cells.setdefault((record.env, record.strategy, record.trial_budget), []).append(record)
    return cells
