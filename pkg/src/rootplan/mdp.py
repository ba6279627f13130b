"""MDP abstraction: continuous action boxes, sampled transitions, returns, seeding.

States are plain 1-D float64 ``numpy`` arrays. Environments expose generative
(sample-based) access to the transition and reward functions through
``Environment.step``; all randomness flows through explicitly passed
``numpy.random.Generator`` streams so that an episode re-run with the same
master seed is bit-identical.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from ._validation import as_float_vector

StateVec = np.ndarray


class ContractViolation(ValueError):
    """An operation was called outside its stated preconditions."""


@dataclass(frozen=True)
class ActionBox:
    """Axis-aligned box of admissible actions, one (low, high) pair per dimension."""

    low: np.ndarray
    high: np.ndarray

    def __post_init__(self):
        low = as_float_vector(self.low, "low")
        high = as_float_vector(self.high, "high")
        if low.shape != high.shape:
            raise ValueError("low and high must have the same length")
        if not np.all(low < high):
            raise ValueError("every low bound must be strictly below its high bound")
        low.setflags(write=False)
        high.setflags(write=False)
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @property
    def dim(self) -> int:
        return self.low.shape[0]

    def contains(self, action: np.ndarray, atol: float = 1e-12) -> bool:
        a = np.asarray(action, dtype=float)
        if a.shape != self.low.shape:
            return False
        return bool(np.all(a >= self.low - atol) and np.all(a <= self.high + atol))

    def clip(self, action: np.ndarray) -> np.ndarray:
        return np.clip(np.asarray(action, dtype=float), self.low, self.high)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Uniform draw from the box."""
        return rng.uniform(self.low, self.high)


class TransitionOutcome(NamedTuple):
    """One sampled transition: successor state, immediate reward, terminal flag."""

    next_state: StateVec
    reward: float
    terminal: bool


@dataclass(frozen=True)
class MdpConfig:
    """Episode-level planning constants for one environment."""

    gamma: float
    max_episode_steps: int
    rollout_depth: int

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.max_episode_steps < 1:
            raise ValueError("max_episode_steps must be positive")
        if self.rollout_depth < 1:
            raise ValueError("rollout_depth must be positive")


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    """Sum of gamma^t * r_t over the reward sequence."""
    total = 0.0
    factor = 1.0
    for r in rewards:
        total += factor * r
        factor *= gamma
    return total


def derive_rng(*keys: int) -> np.random.Generator:
    """Deterministic random stream keyed by an integer tuple.

    Worker streams are derived as ``derive_rng(master_seed, worker_index)`` so
    that changing the worker count never perturbs other workers' streams.
    """
    return np.random.default_rng(np.random.SeedSequence([int(k) for k in keys]))


def derive_seed(*keys: int) -> int:
    """Deterministic child seed keyed by an integer tuple."""
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1)[0])
