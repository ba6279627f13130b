"""Benchmark command line.

Subcommands: ``run`` (execute a grid), ``rank`` (MRR tables from results),
``plot`` (per-environment SVG plots), ``time-compare`` (GP aggregation versus
the merge baseline granted equivalent extra trials), and ``sweep`` (manual
hyperparameter sweep; prints per-variant summaries, no automatic selection).

Exit codes: 0 success, 2 config error, 3 runtime error.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..aggregation import STRATEGY_KINDS
from ..config import ConfigError, Preset, load_config_file, load_preset
from ..environments import ENVIRONMENT_NAMES
from ..mdp import ContractViolation
from .metrics import mrr, rank_inputs_from_records, steps_metric, success_rate
from .plots import emit_plots
from .records import read_records
from .runner import ExperimentGrid, resolve_presets, run_grid, time_equalized_compare

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _csv_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _parse_seeds(text: str) -> list[int]:
    """A plain integer means a seed count (0..n-1); a comma list is explicit."""
    if "," in text:
        return [int(t) for t in _csv_list(text)]
    return list(range(int(text)))


def _parse_trials(text: str) -> list[int]:
    return [int(t) for t in _csv_list(text)]


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--workers", type=int, default=8, help="parallel trees per step")
    parser.add_argument("--seeds", default="30", help="seed count, or comma-separated seeds")
    parser.add_argument("--master-seed", type=int, default=0)
    parser.add_argument("--config", help="key-value config file overriding preset values")
    parser.add_argument(
        "--executor",
        choices=("serial", "process"),
        default="serial",
        help="how tree workers execute within a planning step",
    )
    parser.add_argument("--out", required=True, help="output CSV path")


def _add_strategy_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--phi", type=float, help="similarity scale for vote and merge")
    parser.add_argument("--sigma-f2", type=float, help="GP signal variance")
    parser.add_argument("--length-scale", type=float, help="GP length scale")
    parser.add_argument("--sigma-n2", type=float, help="GP noise variance")
    parser.add_argument("--tau", type=int, help="GP visit threshold for all budgets")
    parser.add_argument("--candidates", type=int, help="GP candidate-set size")


def _override_mapping(args, budgets) -> dict:
    mapping: dict = {}
    if getattr(args, "phi", None) is not None:
        mapping["vote_phi"] = args.phi
        mapping["merge_phi"] = args.phi
    if getattr(args, "sigma_f2", None) is not None:
        mapping["gp_signal_variance"] = args.sigma_f2
    if getattr(args, "length_scale", None) is not None:
        mapping["gp_length_scale"] = args.length_scale
    if getattr(args, "sigma_n2", None) is not None:
        mapping["gp_noise_variance"] = args.sigma_n2
    if getattr(args, "tau", None) is not None:
        mapping["tau_by_budget"] = {int(b): args.tau for b in budgets}
    if getattr(args, "candidates", None) is not None:
        mapping["candidates"] = args.candidates
    return mapping


def _load_presets(env_names, args, budgets) -> dict[str, Preset]:
    file_overrides = load_config_file(args.config) if args.config else {}
    file_overrides.pop("env", None)
    presets = {}
    for name in env_names:
        preset = load_preset(name)
        if file_overrides:
            preset = preset.updated(file_overrides)
        mapping = _override_mapping(args, budgets if budgets else preset.trial_budgets)
        if mapping:
            preset = preset.updated(mapping)
        preset.build_environment()
        presets[name] = preset
    return presets


def _resolve_budgets(args, env_names) -> list[int]:
    if args.trials:
        return _parse_trials(args.trials)
    budget_lists = [tuple(load_preset(name).trial_budgets) for name in env_names]
    if len(set(budget_lists)) > 1:
        raise ConfigError(
            "environments have different preset trial budgets; pass --trials explicitly"
        )
    return list(budget_lists[0])


def cmd_run(args) -> int:
    env_names = _csv_list(args.env)
    strategies = _csv_list(args.strategy) if args.strategy else list(STRATEGY_KINDS)
    for kind in strategies:
        if kind not in STRATEGY_KINDS:
            raise ConfigError(
                f"unknown strategy {kind!r}; expected one of {', '.join(STRATEGY_KINDS)}"
            )
    budgets = _resolve_budgets(args, env_names)
    presets = _load_presets(env_names, args, budgets)
    grid = ExperimentGrid(
        env_names=env_names,
        strategies=strategies,
        trial_budgets=budgets,
        seeds=_parse_seeds(args.seeds),
        workers=args.workers,
    )
    run_grid(
        grid,
        args.out,
        master_seed=args.master_seed,
        presets=presets,
        executor_mode=args.executor,
    )
    print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_rank(args) -> int:
    records = read_records(args.results)
    if not records:
        raise ConfigError(f"{args.results}: no records")
    table = mrr(rank_inputs_from_records(records, metric=args.metric))
    payload = {
        "metric": args.metric,
        "per_task_mrr": table.per_task_mrr,
        "overall_mrr": table.overall_mrr,
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}", file=sys.stderr)
    print(text)
    return EXIT_OK


def cmd_plot(args) -> int:
    records = read_records(args.results)
    if not records:
        raise ConfigError(f"{args.results}: no records")
    constants = {}
    for env in {r.env for r in records}:
        try:
            constants[env] = float(
                load_preset(env).build_environment().spec.max_episode_steps
            )
        except (ConfigError, ValueError):
            constants[env] = float(max(r.steps for r in records if r.env == env))
    paths = emit_plots(records, args.out_dir, constants)
    for path in paths:
        print(f"wrote {path}", file=sys.stderr)
    return EXIT_OK


def cmd_time_compare(args) -> int:
    env_names = _csv_list(args.env)
    if len(env_names) != 1:
        raise ConfigError("time-compare takes exactly one environment")
    budgets = _resolve_budgets(args, env_names)
    presets = _load_presets(env_names, args, budgets)
    time_equalized_compare(
        env_names[0],
        budgets,
        _parse_seeds(args.seeds),
        args.out,
        workers=args.workers,
        master_seed=args.master_seed,
        preset=presets[env_names[0]],
        executor_mode=args.executor,
    )
    print(f"wrote {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    env_names = _csv_list(args.env)
    if len(env_names) != 1:
        raise ConfigError("sweep takes exactly one environment")
    env_name = env_names[0]
    if args.strategy not in STRATEGY_KINDS:
        raise ConfigError(f"unknown strategy {args.strategy!r}")
    budgets = _resolve_budgets(args, env_names)
    seeds = _parse_seeds(args.seeds)

    sweep_axes = []
    for setting in args.set or []:
        key, _, values = setting.partition("=")
        if not values:
            raise ConfigError(f"--set expects key=v1,v2,..., got {setting!r}")
        if key not in Preset.__dataclass_fields__:
            raise ConfigError(f"unknown preset field {key!r}")
        sweep_axes.append((key, [float(v) for v in _csv_list(values)]))
    if not sweep_axes:
        raise ConfigError("sweep requires at least one --set axis")

    combos = [{}]
    for key, values in sweep_axes:
        combos = [dict(c, **{key: v}) for c in combos for v in values]

    base = _load_presets(env_names, args, budgets)[env_name]
    rows = []
    for combo in combos:
        preset = base.updated(combo)
        label = ",".join(f"{k}={v:g}" for k, v in combo.items())
        grid = ExperimentGrid([env_name], [args.strategy], budgets, seeds, args.workers)
        out = Path(args.out).with_suffix("") if args.out else None
        out_path = (
            f"{out}_{label.replace('=', '-').replace(',', '_')}.csv"
            if out
            else f"sweep_{label.replace('=', '-').replace(',', '_')}.csv"
        )
        records = run_grid(
            grid,
            out_path,
            master_seed=args.master_seed,
            presets={env_name: preset},
            executor_mode=args.executor,
            progress=False,
        )
        cap = float(preset.build_environment().spec.max_episode_steps)
        stats = steps_metric(records, {env_name: cap})
        rates = success_rate(records)
        for budget in budgets:
            cell = (env_name, args.strategy, budget)
            rows.append((label, budget, stats[cell].mean, rates[cell]))
        print(f"swept {label}: wrote {out_path}", file=sys.stderr)

    print(f"{'variant':40s} {'budget':>7s} {'mean steps':>11s} {'success':>8s}")
    for label, budget, mean_steps, rate in rows:
        print(f"{label:40s} {budget:7d} {mean_steps:11.2f} {rate:8.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rootplan",
        description="Root-parallel MCTS benchmark harness for continuous actions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment grid and write episode records")
    run_p.add_argument("--env", required=True, help=f"comma list of {', '.join(ENVIRONMENT_NAMES)}")
    run_p.add_argument("--strategy", help="comma list of strategies (default: all)")
    run_p.add_argument("--trials", help="comma list of per-worker trial budgets")
    _add_common(run_p)
    _add_strategy_overrides(run_p)
    run_p.set_defaults(func=cmd_run)

    rank_p = sub.add_parser("rank", help="mean-reciprocal-rank tables from results")
    rank_p.add_argument("--results", required=True, help="CSV written by run")
    rank_p.add_argument("--metric", choices=("steps", "success"), default="steps")
    rank_p.add_argument("--out", help="optional JSON output path")
    rank_p.set_defaults(func=cmd_rank)

    plot_p = sub.add_parser("plot", help="per-environment SVG plots from results")
    plot_p.add_argument("--results", required=True)
    plot_p.add_argument("--out-dir", required=True)
    plot_p.set_defaults(func=cmd_plot)

    tc_p = sub.add_parser(
        "time-compare",
        help="GP aggregation vs merge baseline with inference time converted to trials",
    )
    tc_p.add_argument("--env", required=True)
    tc_p.add_argument("--trials", help="comma list of per-worker trial budgets")
    _add_common(tc_p)
    _add_strategy_overrides(tc_p)
    tc_p.set_defaults(func=cmd_time_compare)

    sweep_p = sub.add_parser("sweep", help="manual hyperparameter sweep (no auto-selection)")
    sweep_p.add_argument("--env", required=True)
    sweep_p.add_argument("--strategy", required=True)
    sweep_p.add_argument("--trials", help="comma list of per-worker trial budgets")
    sweep_p.add_argument(
        "--set",
        action="append",
        metavar="FIELD=V1,V2,...",
        help="preset field values to sweep; repeatable for a cross product",
    )
    _add_common(sweep_p)
    sweep_p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, ContractViolation) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
