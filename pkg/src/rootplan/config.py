"""Preset and config-file handling.

Config grammar
--------------
Plain text, one ``key = value`` pair per line. ``#`` starts a comment; blank
lines are ignored. Values are typed by shape:

* scalar -- ``int`` if it parses as one, else ``float`` if it parses as one,
  else ``true``/``false`` as booleans, else a bare string;
* list -- whitespace-separated scalars, e.g. ``trial_budgets = 15 30 60 120``;
* mapping -- comma-separated ``key:value`` pairs with integer keys, e.g.
  ``tau_by_budget = 15:1, 30:3, 60:5, 120:7``.

Keys prefixed ``env.`` override environment-construction parameters (physics
constants, bounds, episode caps); all other keys configure the planner and
the benchmark harness. One preset file per environment ships inside the
package; user files loaded with ``--config`` override preset keys, and CLI
flags override both.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .aggregation import AggregationChoice
from .environments import ENVIRONMENT_NAMES, Environment, make_environment
from .gp import KernelParams
from .mcts import SearchParams
from .mdp import MdpConfig


class ConfigError(ValueError):
    """Malformed config text or an inconsistent preset."""


def _parse_scalar(token: str):
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        pass
    if token.lower() == "true":
        return True
    if token.lower() == "false":
        return False
    return token


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse the key-value grammar into a flat dict."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: empty key or value in {raw!r}")
        if ":" in value:
            mapping = {}
            for pair in value.split(","):
                k, sep, v = pair.partition(":")
                if not sep:
                    raise ConfigError(f"{source}:{lineno}: malformed mapping entry {pair!r}")
                mapping[int(k.strip())] = _parse_scalar(v.strip())
            values[key] = mapping
        else:
            tokens = value.split()
            values[key] = _parse_scalar(tokens[0]) if len(tokens) == 1 else [
                _parse_scalar(t) for t in tokens
            ]
    return values


def load_config_file(path: str | Path) -> dict:
    path = Path(path)
    return parse_config_text(path.read_text(), source=str(path))


@dataclass(frozen=True)
class Preset:
    """Planner, strategy, and environment settings for one task."""

    env_name: str
    gamma: float
    rollout_depth: int
    uct_weight: float
    pw_c: float
    pw_alpha: float
    vote_phi: float
    merge_phi: float
    gp_signal_variance: float
    gp_length_scale: float
    gp_noise_variance: float
    tau_by_budget: dict
    trial_budgets: list
    dpw_d: float | None = None
    dpw_beta: float | None = None
    vote_offset_epsilon: float = 1.0
    candidates: int | None = None
    default_seeds: int = 30
    env_overrides: dict = field(default_factory=dict)

    def build_environment(self) -> Environment:
        return make_environment(self.env_name, self.env_overrides)

    def mdp_config(self, env: Environment | None = None) -> MdpConfig:
        env = env if env is not None else self.build_environment()
        return MdpConfig(
            gamma=self.gamma,
            max_episode_steps=env.spec.max_episode_steps,
            rollout_depth=self.rollout_depth,
        )

    def search_params(self, trials: int) -> SearchParams:
        return SearchParams(
            uct_weight=self.uct_weight,
            pw_c=self.pw_c,
            pw_alpha=self.pw_alpha,
            trials=trials,
            dpw_d=self.dpw_d,
            dpw_beta=self.dpw_beta,
        )

    def tau_for_budget(self, budget: int) -> int:
        """Visit threshold for a trial budget: exact entry if present, else the
        entry for the largest predefined budget below it, else the smallest."""
        if budget in self.tau_by_budget:
            return int(self.tau_by_budget[budget])
        below = [b for b in self.tau_by_budget if b <= budget]
        key = max(below) if below else min(self.tau_by_budget)
        return int(self.tau_by_budget[key])

    def kernel_params(self) -> KernelParams:
        return KernelParams(
            signal_variance=self.gp_signal_variance,
            length_scale=self.gp_length_scale,
            noise_variance=self.gp_noise_variance,
        )

    def strategy_choice(self, kind: str, budget: int) -> AggregationChoice:
        if kind in ("max", "most_visited", "single_thread"):
            return AggregationChoice(kind=kind)
        if kind == "similarity_vote":
            return AggregationChoice(
                kind=kind, phi=self.vote_phi, vote_offset_epsilon=self.vote_offset_epsilon
            )
        if kind == "similarity_merge":
            return AggregationChoice(kind=kind, phi=self.merge_phi)
        if kind == "gpr2p":
            return AggregationChoice(
                kind=kind,
                kernel=self.kernel_params(),
                tau=self.tau_for_budget(budget),
                candidates=self.candidates,
            )
        raise ConfigError(f"unknown strategy kind {kind!r}")

    def updated(self, mapping: dict) -> "Preset":
        """New preset with keys from a parsed config mapping applied on top."""
        merged = dict(mapping)
        env_overrides = dict(self.env_overrides)
        updates: dict = {}
        for key, value in merged.items():
            if key.startswith("env."):
                env_overrides[key[4:]] = tuple(value) if isinstance(value, list) else value
            elif key == "env":
                updates["env_name"] = value
            elif key in Preset.__dataclass_fields__:
                updates[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        updates["env_overrides"] = env_overrides
        return replace(self, **updates)


def preset_from_mapping(mapping: dict, source: str = "<config>") -> Preset:
    values = dict(mapping)
    env_overrides = {}
    for key in list(values):
        if key.startswith("env."):
            value = values.pop(key)
            env_overrides[key[4:]] = tuple(value) if isinstance(value, list) else value
    try:
        env_name = values.pop("env")
    except KeyError:
        raise ConfigError(f"{source}: missing required key 'env'") from None
    known = set(Preset.__dataclass_fields__)
    unknown = sorted(k for k in values if k not in known)
    if unknown:
        raise ConfigError(f"{source}: unknown config keys: {', '.join(unknown)}")
    budgets = values.get("trial_budgets")
    if isinstance(budgets, int):
        values["trial_budgets"] = [budgets]
    try:
        return Preset(env_name=env_name, env_overrides=env_overrides, **values)
    except TypeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def preset_path(env_name: str) -> Path:
    res = resources.files("rootplan").joinpath("presets", f"{env_name}.cfg")
    with resources.as_file(res) as path:
        return Path(path)


def load_preset(env_name: str) -> Preset:
    """Load the shipped preset for one environment."""
    if env_name not in ENVIRONMENT_NAMES and env_name != "lunar_lander":
        raise ConfigError(
            f"unknown environment {env_name!r}; expected one of "
            f"{', '.join(ENVIRONMENT_NAMES)}"
        )
    res = resources.files("rootplan").joinpath("presets", f"{env_name}.cfg")
    text = res.read_text()
    return preset_from_mapping(parse_config_text(text, source=f"presets/{env_name}.cfg"))
