"""Single-tree MCTS for continuous actions.

Action growth at every node is throttled by progressive widening: a node may
hold at most ``floor(pw_c * n^pw_alpha)`` action edges after ``n`` trials have
passed through it. Under stochastic transitions, double progressive widening
additionally caps each edge's sampled successor set at
``floor(dpw_d * m^dpw_beta)`` after ``m`` edge visits; blocked edges re-use an
existing successor drawn proportionally to how often it was generated.

Each trial runs selection (argmax UCT among existing edges), expansion
(uniform action draw from the box), a depth-limited uniform-random rollout,
and backpropagation of discounted reward-to-go along the path. Visit counts
increment on backpropagation; Q values are running means of backed-up
returns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .aggregation import ActionStats
from .environments import Environment
from .mdp import ActionBox, MdpConfig, StateVec


@dataclass(frozen=True)
class SearchParams:
    """UCT weight, widening coefficients, and per-tree trial budget."""

    uct_weight: float
    pw_c: float
    pw_alpha: float
    trials: int
    dpw_d: float | None = None
    dpw_beta: float | None = None

    def __post_init__(self):
        if self.uct_weight < 0:
            raise ValueError("uct_weight must be nonnegative")
        if self.pw_c <= 0:
            raise ValueError("pw_c must be positive")
        if not 0.0 < self.pw_alpha < 1.0:
            raise ValueError("pw_alpha must lie in (0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        if (self.dpw_d is None) != (self.dpw_beta is None):
            raise ValueError("dpw_d and dpw_beta must be given together")
        if self.dpw_d is not None:
            if self.dpw_d <= 0:
                raise ValueError("dpw_d must be positive")
            if not 0.0 < self.dpw_beta < 1.0:
                raise ValueError("dpw_beta must lie in (0, 1)")

    @property
    def dpw_enabled(self) -> bool:
        return self.dpw_d is not None


@dataclass(eq=False)
class Successor:
    """One sampled next state of an edge: occurrence count and mean reward."""

    state: StateVec
    node: "TreeNode"
    count: int
    reward: float


@dataclass(eq=False)
class ActionEdge:
    """Root-to-leaf action with running-mean value and sampled successors."""

    action: np.ndarray
    visits: int = 0
    q: float = 0.0
    successors: list[Successor] = field(default_factory=list)


@dataclass(eq=False)
class TreeNode:
    state: StateVec
    visits: int = 0
    children: list[ActionEdge] = field(default_factory=list)
    is_terminal: bool = False


class SearchTree:
    """MCTS tree rooted at one environment state."""

    def __init__(
        self,
        root_state: StateVec,
        mdp: MdpConfig,
        action_box: ActionBox,
        root_terminal: bool = False,
    ):
        self.root = TreeNode(np.asarray(root_state, dtype=float), is_terminal=root_terminal)
        self.mdp = mdp
        self.action_box = action_box

    @property
    def total_trials(self) -> int:
        return self.root.visits


def uct_score(edge: ActionEdge, parent_visits: int, uct_weight: float) -> float:
    """Mean value plus the visit-count exploration bonus."""
    return edge.q + uct_weight * math.sqrt(2.0 * math.log(parent_visits) / edge.visits)


def widening_allowance(visits: int, coeff: float, exponent: float) -> int:
    """Maximum branch count permitted after ``visits`` visits: floor(coeff * visits^exponent)."""
    if visits < 0:
        raise ValueError("visits must be nonnegative")
    return int(math.floor(coeff * visits**exponent))


def _select_edge(node: TreeNode, uct_weight: float) -> ActionEdge:
    # Ties break toward the lowest child index.
    best = node.children[0]
    best_score = uct_score(best, node.visits, uct_weight)
    for edge in node.children[1:]:
        score = uct_score(edge, node.visits, uct_weight)
        if score > best_score:
            best = edge
            best_score = score
    return best


def _rollout(
    state: StateVec,
    env: Environment,
    mdp: MdpConfig,
    box: ActionBox,
    rng: np.random.Generator,
) -> float:
    """Uniform-random rollout; returns discounted reward-to-go from ``state``."""
    depth = mdp.rollout_depth
    actions = rng.uniform(box.low, box.high, size=(depth, box.dim))
    total = 0.0
    factor = 1.0
    gamma = mdp.gamma
    step = env.step
    for i in range(depth):
        outcome = step(state, actions[i], rng)
        total += factor * outcome.reward
        if outcome.terminal:
            break
        factor *= gamma
        state = outcome.next_state
    return total


def _pick_successor(successors: list[Successor], rng: np.random.Generator) -> Successor:
    """Draw an existing successor proportionally to its occurrence count."""
    total = 0
    for succ in successors:
        total += succ.count
    target = rng.random() * total
    acc = 0.0
    for succ in successors:
        acc += succ.count
        if target < acc:
            return succ
    return successors[-1]


def run_trial(
    tree: SearchTree,
    params: SearchParams,
    env: Environment,
    rng: np.random.Generator,
) -> tuple[int, float]:
    """Execute one selection/expansion/simulation/backpropagation cycle.

    Returns the index of the root edge the trial descended through and the
    discounted return backed up into it (useful for instrumentation).
    """
    mdp = tree.mdp
    box = tree.action_box
    gamma = mdp.gamma

    path: list[tuple[TreeNode, ActionEdge, float]] = []
    node = tree.root
    leaf_value = 0.0

    while True:
        if node.is_terminal:
            break

        allowance = widening_allowance(node.visits + 1, params.pw_c, params.pw_alpha)
        if not node.children or len(node.children) < allowance:
            # Expansion: new uniform action, sample its first successor, roll out.
            action = rng.uniform(box.low, box.high)
            edge = ActionEdge(action=action)
            node.children.append(edge)
            outcome = env.step(node.state, action, rng)
            child = TreeNode(outcome.next_state, is_terminal=outcome.terminal)
            edge.successors.append(Successor(outcome.next_state, child, 1, outcome.reward))
            path.append((node, edge, outcome.reward))
            node = child
            if not child.is_terminal:
                leaf_value = _rollout(child.state, env, mdp, box, rng)
            break

        edge = _select_edge(node, params.uct_weight)

        if params.dpw_enabled:
            succ_allowance = widening_allowance(edge.visits + 1, params.dpw_d, params.dpw_beta)
            if not edge.successors or len(edge.successors) < succ_allowance:
                outcome = env.step(node.state, edge.action, rng)
                match = None
                for succ in edge.successors:
                    if np.array_equal(succ.state, outcome.next_state):
                        match = succ
                        break
                if match is None:
                    child = TreeNode(outcome.next_state, is_terminal=outcome.terminal)
                    succ = Successor(outcome.next_state, child, 1, outcome.reward)
                    edge.successors.append(succ)
                    path.append((node, edge, outcome.reward))
                    node = child
                    if not child.is_terminal:
                        leaf_value = _rollout(child.state, env, mdp, box, rng)
                    break
                match.count += 1
                match.reward += (outcome.reward - match.reward) / match.count
                path.append((node, edge, outcome.reward))
                node = match.node
                continue
            succ = _pick_successor(edge.successors, rng)
        else:
            succ = edge.successors[0]

        path.append((node, edge, succ.reward))
        node = succ.node

    # Backpropagation: compose discounted reward-to-go along the path.
    node.visits += 1
    ret = leaf_value
    for parent, edge, reward in reversed(path):
        ret = reward + gamma * ret
        edge.visits += 1
        edge.q += (ret - edge.q) / edge.visits
        parent.visits += 1

    root_edge = path[0][1] if path else None
    root_index = tree.root.children.index(root_edge) if root_edge is not None else -1
    return root_index, ret


def build_tree(
    root_state: StateVec,
    params: SearchParams,
    env: Environment,
    mdp: MdpConfig,
    rng: np.random.Generator,
    action_box: ActionBox | None = None,
) -> SearchTree:
    """Run ``params.trials`` trials from a fresh root."""
    box = action_box if action_box is not None else env.spec.action_box
    tree = SearchTree(root_state, mdp, box)
    for _ in range(params.trials):
        run_trial(tree, params, env, rng)
    return tree


def root_action_stats(tree: SearchTree, tree_index: int = 0) -> list[ActionStats]:
    """Per-root-child (action, Q, visit count) records in insertion order."""
    if not tree.root.children:
        raise ValueError("no sampled actions: the tree has no root children")
    return [
        ActionStats(action=edge.action.copy(), q=edge.q, visits=edge.visits, tree_index=tree_index)
        for edge in tree.root.children
    ]
