"""SVG result plots: one file per environment, mean transformed steps versus
trial budget with 95% CI bands per strategy. Rendering is byte-deterministic
for identical inputs (fixed hash salt, no embedded timestamps)."""
from __future__ import annotations

import warnings
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from ..aggregation import STRATEGY_KINDS
from .metrics import steps_metric
from .records import EpisodeRecord

_STYLE = {
    "single_thread": ("#7f7f7f", "o"),
    "max": ("#1f77b4", "s"),
    "most_visited": ("#ff7f0e", "v"),
    "similarity_vote": ("#2ca02c", "^"),
    "similarity_merge": ("#d62728", "D"),
    "gpr2p": ("#9467bd", "*"),
}


def emit_plots(
    records: Sequence[EpisodeRecord],
    out_dir: str | Path,
    plot_constants: dict[str, float],
) -> list[Path]:
    """Write ``<env>.svg`` per environment present in the records."""
    if not records:
        raise ValueError("no records to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    cells = steps_metric(records, plot_constants)
    envs = sorted({key[0] for key in cells})
    budgets_by_env = {
        env: sorted({key[2] for key in cells if key[0] == env}) for env in envs
    }
    strategies_by_env = {
        env: [k for k in STRATEGY_KINDS if any(key[:2] == (env, k) for key in cells)]
        for env in envs
    }

    plt.rcParams["svg.hashsalt"] = "rootplan"
    written = []
    for env in envs:
        fig, ax = plt.subplots(figsize=(5.0, 3.6))
        budgets = budgets_by_env[env]
        for strategy in strategies_by_env[env]:
            xs, ys, los, his = [], [], [], []
            for budget in budgets:
                stats = cells.get((env, strategy, budget))
                if stats is None:
                    warnings.warn(
                        f"missing cell ({env}, {strategy}, {budget}); plotting with a gap",
                        RuntimeWarning,
                        stacklevel=2,
                    )
                    continue
                xs.append(budget)
                ys.append(stats.transformed_mean)
                los.append(plot_constants[env] - stats.ci_high)
                his.append(plot_constants[env] - stats.ci_low)
            color, marker = _STYLE.get(strategy, ("#000000", "x"))
            ax.plot(xs, ys, marker=marker, markersize=4, color=color, label=strategy)
            ax.fill_between(xs, los, his, color=color, alpha=0.15, linewidth=0)
        ax.set_xlabel("trials per worker")
        ax.set_ylabel("episode cap minus mean steps")
        ax.set_title(env)
        ax.set_xticks(budgets)
        ax.legend(fontsize=7, loc="best")
        fig.text(
            0.99,
            0.01,
            f"transform constant = {plot_constants[env]:g} (episode cap)",
            ha="right",
            fontsize=6,
            color="#555555",
        )
        fig.tight_layout()
        path = out_dir / f"{env}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written
