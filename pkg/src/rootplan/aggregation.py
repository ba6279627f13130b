"""Action-selection strategies over the root statistics of a tree forest.

Every strategy consumes the per-tree root records ``(action, Q, N)`` and
returns one action:

* ``max`` / ``most_visited`` -- argmax of Q or N over the union of all
  sampled root actions.
* ``similarity_vote`` -- each tree nominates its own best action; nominees
  then score each other through a distance kernel and the highest kernel-
  weighted vote wins. Champion values are shifted to be positive first,
  since the vote treats value as voting weight.
* ``similarity_merge`` -- every sampled action's (Q, N) is blended with all
  others via the same kernel, weighting neighbours by visit count; argmax of
  the blended Q wins.
* ``gpr2p`` -- fit a Gaussian process to the visit-filtered (action, Q)
  pairs and return the posterior-mean-maximizing action from a candidate set
  covering the whole box, so the answer may be an action no tree sampled.
* ``single_thread`` -- the non-parallel baseline: one tree, max-Q selection.

All strategies are pure functions of the forest plus configuration.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
from scipy.stats import qmc

from .gp import KernelParams, fit_gp
from .mdp import ActionBox

if TYPE_CHECKING:
    from .parallel import ForestStats

STRATEGY_KINDS = (
    "single_thread",
    "max",
    "most_visited",
    "similarity_vote",
    "similarity_merge",
    "gpr2p",
)

# Candidate-set sizes for the posterior-mean scan, by action dimension.
DEFAULT_CANDIDATES_LOW_DIM = 1024
DEFAULT_CANDIDATES_3D = 4096


@dataclass(frozen=True)
class ActionStats:
    """Root-child record: action vector, mean return, visit count, source tree."""

    action: np.ndarray
    q: float
    visits: int
    tree_index: int = 0

    def __post_init__(self):
        if self.visits < 1:
            raise ValueError("visits must be >= 1")
        if not np.isfinite(self.q):
            raise ValueError("q must be finite")


@dataclass(frozen=True)
class AggregationChoice:
    """Strategy selector plus the hyperparameters that strategy needs.

    ``phi`` applies to the two similarity strategies; ``kernel``, ``tau`` and
    ``candidates`` to gpr2p; ``vote_offset_epsilon`` to the vote only.
    Parameters must be present exactly for the kinds that use them.
    """

    kind: str
    phi: float | None = None
    kernel: KernelParams | None = None
    tau: int | None = None
    candidates: int | None = None
    vote_offset_epsilon: float | None = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        needs_phi = self.kind in ("similarity_vote", "similarity_merge")
        if needs_phi and (self.phi is None or self.phi <= 0):
            raise ValueError(f"{self.kind} requires phi > 0")
        if not needs_phi and self.phi is not None:
            raise ValueError(f"{self.kind} does not take phi")
        if self.kind == "gpr2p":
            if self.kernel is None:
                raise ValueError("gpr2p requires kernel parameters")
            if self.tau is None or self.tau < 1:
                raise ValueError("gpr2p requires a positive visit threshold tau")
            if self.candidates is not None and self.candidates < 1:
                raise ValueError("candidates must be positive")
        else:
            if self.kernel is not None or self.tau is not None or self.candidates is not None:
                raise ValueError(f"{self.kind} does not take gpr2p parameters")
        if self.kind == "similarity_vote":
            eps = 1.0 if self.vote_offset_epsilon is None else self.vote_offset_epsilon
            if eps < 0:
                raise ValueError("vote_offset_epsilon must be nonnegative")
            object.__setattr__(self, "vote_offset_epsilon", eps)
        elif self.vote_offset_epsilon is not None:
            raise ValueError(f"{self.kind} does not take vote_offset_epsilon")


def _flatten(forest: "ForestStats") -> list[ActionStats]:
    flat = [stat for tree_stats in forest.per_tree for stat in tree_stats]
    if not flat:
        raise ValueError("empty forest: no sampled root actions")
    return flat


def select_max(forest: "ForestStats") -> np.ndarray:
    """Action with the highest mean return across all trees."""
    flat = _flatten(forest)
    best = flat[0]
    for stat in flat[1:]:
        if stat.q > best.q:
            best = stat
    return best.action.copy()


def select_most_visited(forest: "ForestStats") -> np.ndarray:
    """Action with the highest visit count across all trees."""
    flat = _flatten(forest)
    best = flat[0]
    for stat in flat[1:]:
        if stat.visits > best.visits:
            best = stat
    return best.action.copy()


def similarity_matrix(actions: list[np.ndarray], phi: float) -> np.ndarray:
    """Pairwise weights exp(-phi * squared distance); symmetric, unit diagonal."""
    if phi <= 0:
        raise ValueError("phi must be positive")
    A = np.asarray(actions, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    sq = (
        np.sum(A**2, axis=1)[:, None]
        + np.sum(A**2, axis=1)[None, :]
        - 2.0 * A @ A.T
    )
    K = np.exp(-phi * np.maximum(sq, 0.0))
    np.fill_diagonal(K, 1.0)
    return K


def select_similarity_vote(
    forest: "ForestStats", phi: float, offset_epsilon: float = 1.0
) -> np.ndarray:
    """Kernel-weighted vote among each tree's own best action.

    When any champion value is negative, all champion values are shifted by
    ``-min + offset_epsilon`` first so value can act as a positive voting
    weight.
    """
    champions: list[ActionStats] = []
    for tree_stats in forest.per_tree:
        if not tree_stats:
            raise ValueError("empty forest: a tree has no sampled root actions")
        best = tree_stats[0]
        for stat in tree_stats[1:]:
            if stat.q > best.q:
                best = stat
        champions.append(best)
    if not champions:
        raise ValueError("empty forest: no trees")

    values = np.array([c.q for c in champions])
    min_value = values.min()
    if min_value < 0:
        values = values - min_value + offset_epsilon
    K = similarity_matrix([c.action for c in champions], phi)
    scores = K @ values
    return champions[int(np.argmax(scores))].action.copy()


def select_similarity_merge(
    forest: "ForestStats", phi: float, accumulate: bool = True
) -> np.ndarray:
    """Argmax of visit-weighted, kernel-blended values over all sampled actions.

    Every action's statistics absorb those of all other actions, weighted by
    kernel similarity and visit count:

        N_blend(i) = N_i + sum_{j != i} K_ij N_j
        Q_blend(i) = (N_i Q_i + sum_{j != i} K_ij N_j Q_j) / N_blend(i)

    ``accumulate=False`` switches to a variant where only the last other
    action contributes (each inner update overwrites the previous one);
    it exists to make the difference between the two readings measurable
    and is not used by any shipped configuration.
    """
    flat = _flatten(forest)
    N = np.array([s.visits for s in flat], dtype=float)
    Q = np.array([s.q for s in flat])
    if len(flat) == 1:
        return flat[0].action.copy()
    K = similarity_matrix([s.action for s in flat], phi)
    if accumulate:
        n_blend = K @ N
        q_blend = (K @ (N * Q)) / n_blend
    else:
        n = len(flat)
        q_blend = np.empty(n)
        for i in range(n):
            last = n - 1 if i != n - 1 else n - 2
            n_blend_i = N[i] + K[i, last] * N[last]
            q_blend[i] = (N[i] * Q[i] + K[i, last] * N[last] * Q[last]) / n_blend_i
    return flat[int(np.argmax(q_blend))].action.copy()


def candidate_grid(
    box: ActionBox, count: int, rng: np.random.Generator
) -> np.ndarray:
    """Seeded low-discrepancy candidate points covering the action box."""
    sampler = qmc.Sobol(d=box.dim, scramble=True, seed=rng)
    points = sampler.random(count)
    return qmc.scale(points, box.low, box.high)


@dataclass(frozen=True)
class Gpr2pDecision:
    """Outcome of a GP-based selection, with diagnostics."""

    action: np.ndarray
    used_fallback: bool
    posterior_mean: float
    posterior_variance: float


def gpr2p_decision(
    forest: "ForestStats",
    choice: AggregationChoice,
    box: ActionBox,
    rng: np.random.Generator | None = None,
) -> Gpr2pDecision:
    """Fit a GP to visit-filtered root statistics and scan its posterior mean.

    Candidates are the filtered sampled actions followed by a seeded
    low-discrepancy covering of the box, so ties (e.g. a constant posterior)
    resolve toward sampled actions. Falls back to max-Q selection when no
    action passes the visit threshold.
    """
    if choice.kind != "gpr2p":
        raise ValueError("choice.kind must be 'gpr2p'")
    flat = _flatten(forest)
    valid = [s for s in flat if s.visits >= choice.tau]
    if not valid:
        warnings.warn(
            f"gpr2p: no root action reaches visit threshold {choice.tau}; "
            "falling back to max-Q selection",
            RuntimeWarning,
            stacklevel=2,
        )
        action = select_max(forest)
        return Gpr2pDecision(action, True, float("nan"), float("nan"))

    X = np.array([s.action for s in valid], dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    y = np.array([s.q for s in valid])
    # Standardized targets make the configured signal/noise variances act as
    # fractions of the observed return variance, so one kernel setting works
    # across tasks with very different return scales.
    model = fit_gp(X, y, choice.kernel, center_targets=True, scale_targets=True)

    if choice.candidates is not None:
        n_extra = choice.candidates
    else:
        n_extra = DEFAULT_CANDIDATES_3D if box.dim >= 3 else DEFAULT_CANDIDATES_LOW_DIM
    rng = rng if rng is not None else np.random.default_rng(0)
    extra = candidate_grid(box, n_extra, rng)
    candidates = np.vstack([X, extra])

    means = model.predict(candidates)
    best = int(np.argmax(means))
    action = candidates[best].copy()
    variance = model.posterior_variance(action)
    return Gpr2pDecision(action, False, float(means[best]), variance)


def select_gpr2p(
    forest: "ForestStats",
    choice: AggregationChoice,
    box: ActionBox,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    return gpr2p_decision(forest, choice, box, rng).action


def select_action(
    forest: "ForestStats",
    choice: AggregationChoice,
    box: ActionBox,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Dispatch to the configured strategy."""
    if choice.kind in ("max", "single_thread"):
        return select_max(forest)
    if choice.kind == "most_visited":
        return select_most_visited(forest)
    if choice.kind == "similarity_vote":
        return select_similarity_vote(forest, choice.phi, choice.vote_offset_epsilon)
    if choice.kind == "similarity_merge":
        return select_similarity_merge(forest, choice.phi)
    if choice.kind == "gpr2p":
        return select_gpr2p(forest, choice, box, rng)
    raise ValueError(f"unknown strategy kind {choice.kind!r}")
