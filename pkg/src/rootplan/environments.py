"""Native benchmark environments with closed-form dynamics.

Five tasks ship with the library:

* ``mountain_car`` -- 1-D continuous force control; the car must build
  momentum by oscillating because the engine is weaker than gravity.
  Deterministic transitions.
* ``pendulum`` -- torque control of an underactuated pendulum; the goal is
  to hold the upright band for a configured number of consecutive steps.
  Deterministic transitions.
* ``random_teleporter`` -- 2-D navigation where the magnitude and direction
  of each displacement are perturbed by uniform noise. Stochastic.
* ``wide_corridor`` / ``narrow_corridor`` -- teleporter variants with a
  position-dependent external force: a straight corridor between start and
  goal assists movement, everywhere else a weaker force hinders it. The two
  variants differ only in the corridor half-width.

Transitions are pure functions of ``(state, action, rng)``; environment
objects carry parameters only and are cheap to copy between workers.
"""
from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .mdp import ActionBox, ContractViolation, StateVec, TransitionOutcome

STOCHASTIC_ENVS = frozenset({"random_teleporter", "wide_corridor", "narrow_corridor"})


@dataclass(frozen=True)
class EnvSpec:
    """Static description of one environment."""

    name: str
    action_box: ActionBox
    state_dim: int
    stochastic: bool
    success_predicate: str
    max_episode_steps: int
    env_params: dict

    def __post_init__(self):
        if self.stochastic != (self.name in STOCHASTIC_ENVS):
            raise ValueError(
                f"stochastic flag for {self.name!r} must be "
                f"{self.name in STOCHASTIC_ENVS}"
            )


@dataclass(frozen=True)
class ForceField:
    """Straight corridor segment whose interior assists motion and exterior
    hinders it. The segment runs from ``corridor_center`` along
    ``corridor_axis`` for ``corridor_length`` units (infinite when None), so
    the space past the segment's end is outside the corridor."""

    corridor_axis: np.ndarray
    corridor_center: np.ndarray
    corridor_half_width: float
    inside_force: np.ndarray
    outside_force: np.ndarray
    corridor_length: float | None = None

    def __post_init__(self):
        axis = np.asarray(self.corridor_axis, dtype=float)
        norm = float(np.linalg.norm(axis))
        if norm == 0:
            raise ValueError("corridor_axis must be nonzero")
        object.__setattr__(self, "corridor_axis", axis / norm)
        object.__setattr__(
            self, "corridor_center", np.asarray(self.corridor_center, dtype=float)
        )
        object.__setattr__(self, "inside_force", np.asarray(self.inside_force, dtype=float))
        object.__setattr__(self, "outside_force", np.asarray(self.outside_force, dtype=float))
        if self.corridor_half_width <= 0:
            raise ValueError("corridor_half_width must be positive")
        if self.corridor_length is not None and self.corridor_length <= 0:
            raise ValueError("corridor_length must be positive")

    def distance_to_centerline(self, position: np.ndarray) -> float:
        dx = position[0] - self.corridor_center[0]
        dy = position[1] - self.corridor_center[1]
        return abs(dx * self.corridor_axis[1] - dy * self.corridor_axis[0])

    def contains(self, position: np.ndarray) -> bool:
        if self.distance_to_centerline(position) > self.corridor_half_width:
            return False
        dx = position[0] - self.corridor_center[0]
        dy = position[1] - self.corridor_center[1]
        along = dx * self.corridor_axis[0] + dy * self.corridor_axis[1]
        if along < 0:
            return False
        return self.corridor_length is None or along <= self.corridor_length

    def force_at(self, position: np.ndarray) -> np.ndarray:
        return self.inside_force if self.contains(position) else self.outside_force


class Environment(abc.ABC):
    """Generative-model access to an MDP: sample transitions, never enumerate them."""

    @property
    @abc.abstractmethod
    def spec(self) -> EnvSpec:
        ...

    @abc.abstractmethod
    def initial_state(self, rng: np.random.Generator) -> StateVec:
        ...

    @abc.abstractmethod
    def step(
        self, state: StateVec, action: np.ndarray, rng: np.random.Generator
    ) -> TransitionOutcome:
        """Sample one transition. Identical (state, action, rng-state) triples
        produce identical outcomes; terminal states must not be stepped."""


def _check_scalar_action(value: float, low: float, high: float, name: str) -> None:
    if not (low - 1e-9 <= value <= high + 1e-9):
        raise ContractViolation(f"{name} action {value} outside [{low}, {high}]")


@dataclass(frozen=True)
class MountainCarEnv(Environment):
    """Continuous-force mountain car.

    ``velocity += force * power - gravity_coef * cos(3 * position)``, then
    ``position += velocity``, both clipped to their bounds. Reaching
    ``goal_position`` terminates the episode. Each step costs
    ``ctrl_cost * force**2`` and the terminal step additionally pays
    ``goal_bonus``.
    """

    min_position: float = -1.2
    max_position: float = 0.6
    max_speed: float = 0.07
    power: float = 0.0015
    gravity_coef: float = 0.0025
    goal_position: float = 0.45
    ctrl_cost: float = 0.1
    goal_bonus: float = 100.0
    start_low: float = -0.6
    start_high: float = -0.4
    max_episode_steps: int = 160

    @property
    def spec(self) -> EnvSpec:
        return EnvSpec(
            name="mountain_car",
            action_box=ActionBox(np.array([-1.0]), np.array([1.0])),
            state_dim=2,
            stochastic=False,
            success_predicate="reach_goal",
            max_episode_steps=self.max_episode_steps,
            env_params=_params_dict(self),
        )

    def initial_state(self, rng: np.random.Generator) -> StateVec:
        return np.array([rng.uniform(self.start_low, self.start_high), 0.0])

    def step(self, state, action, rng) -> TransitionOutcome:
        force = float(action[0])
        _check_scalar_action(force, -1.0, 1.0, "mountain_car")
        position = float(state[0])
        velocity = float(state[1])
        velocity += force * self.power - self.gravity_coef * math.cos(3.0 * position)
        if velocity > self.max_speed:
            velocity = self.max_speed
        elif velocity < -self.max_speed:
            velocity = -self.max_speed
        position += velocity
        if position > self.max_position:
            position = self.max_position
        elif position < self.min_position:
            position = self.min_position
            if velocity < 0.0:
                velocity = 0.0
        terminal = position >= self.goal_position
        reward = -self.ctrl_cost * force * force
        if terminal:
            reward += self.goal_bonus
        return TransitionOutcome(np.array([position, velocity]), reward, terminal)


def angle_normalize(theta: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    return -((-theta + math.pi) % (2.0 * math.pi) - math.pi)


@dataclass(frozen=True)
class PendulumEnv(Environment):
    """Torque-controlled pendulum with theta = 0 at the upright position.

    Semi-implicit Euler integration of
    ``theta_ddot = (3 g / (2 L)) sin(theta) + (3 / (m L^2)) u``.
    Per-step reward is ``-(angle^2 + 0.1 * theta_dot^2 + 0.001 * u^2)``
    evaluated at the pre-step state.

    The state is ``[theta, theta_dot, hold_count]``: ``hold_count`` tracks how
    many consecutive steps the pendulum has stayed inside the upright band
    (``|theta| < theta_tol`` and ``|theta_dot| < omega_tol``), which makes the
    hold-to-succeed termination rule a function of the state alone. The
    episode terminates, counting as success, once ``hold_count`` reaches
    ``hold_steps``.
    """

    gravity: float = 10.0
    mass: float = 1.0
    length: float = 1.0
    dt: float = 0.05
    max_torque: float = 2.0
    max_speed: float = 8.0
    theta_tol: float = 0.25
    omega_tol: float = 1.0
    hold_steps: int = 5
    max_episode_steps: int = 120

    @property
    def spec(self) -> EnvSpec:
        return EnvSpec(
            name="pendulum",
            action_box=ActionBox(np.array([-self.max_torque]), np.array([self.max_torque])),
            state_dim=3,
            stochastic=False,
            success_predicate="hold_upright_band",
            max_episode_steps=self.max_episode_steps,
            env_params=_params_dict(self),
        )

    def initial_state(self, rng: np.random.Generator) -> StateVec:
        return np.array([rng.uniform(-math.pi, math.pi), rng.uniform(-1.0, 1.0), 0.0])

    def step(self, state, action, rng) -> TransitionOutcome:
        torque = float(action[0])
        _check_scalar_action(torque, -self.max_torque, self.max_torque, "pendulum")
        theta = float(state[0])
        theta_dot = float(state[1])
        hold = float(state[2])

        cost = theta * theta + 0.1 * theta_dot * theta_dot + 0.001 * torque * torque

        accel = (
            1.5 * self.gravity / self.length * math.sin(theta)
            + 3.0 / (self.mass * self.length * self.length) * torque
        )
        new_theta_dot = theta_dot + accel * self.dt
        if new_theta_dot > self.max_speed:
            new_theta_dot = self.max_speed
        elif new_theta_dot < -self.max_speed:
            new_theta_dot = -self.max_speed
        new_theta = angle_normalize(theta + new_theta_dot * self.dt)

        in_band = abs(new_theta) < self.theta_tol and abs(new_theta_dot) < self.omega_tol
        new_hold = hold + 1.0 if in_band else 0.0
        terminal = new_hold >= self.hold_steps
        return TransitionOutcome(
            np.array([new_theta, new_theta_dot, new_hold]), -cost, terminal
        )


@dataclass(frozen=True)
class TeleporterEnv(Environment):
    """Goal-seeking in a bounded arena under multiplicative action noise.

    The commanded displacement is the action with its Euclidean length capped
    at ``max_step``; its magnitude is then scaled by ``1 + e_m`` and its
    direction rotated by ``e_d`` with ``e_m ~ U(-sigma_mag, sigma_mag)`` and
    ``e_d ~ U(-sigma_dir, sigma_dir)``; the result is added to the position
    and clamped to the arena. Every step costs -1; reaching within
    ``goal_radius`` of the goal terminates the episode.
    """

    arena_width: float = 10.0
    arena_height: float = 10.0
    start: tuple = (1.5, 1.5)
    goal: tuple = (8.5, 8.5)
    goal_radius: float = 0.5
    max_step: float = 1.0
    sigma_mag: float = 0.2
    sigma_dir: float = math.radians(15.0)
    max_episode_steps: int = 60

    @property
    def name(self) -> str:
        return "random_teleporter"

    @property
    def spec(self) -> EnvSpec:
        m = self.max_step
        return EnvSpec(
            name=self.name,
            action_box=ActionBox(np.array([-m, -m]), np.array([m, m])),
            state_dim=2,
            stochastic=True,
            success_predicate="reach_goal",
            max_episode_steps=self.max_episode_steps,
            env_params=_params_dict(self),
        )

    def initial_state(self, rng: np.random.Generator) -> StateVec:
        return np.array(self.start, dtype=float)

    def _noisy_displacement(self, action, rng) -> tuple:
        ax = float(action[0])
        ay = float(action[1])
        m = self.max_step
        _check_scalar_action(ax, -m, m, self.name)
        _check_scalar_action(ay, -m, m, self.name)
        length = math.hypot(ax, ay)
        if length > m:
            ax *= m / length
            ay *= m / length
        scale = 1.0 + rng.uniform(-self.sigma_mag, self.sigma_mag) if self.sigma_mag > 0 else 1.0
        if self.sigma_dir > 0:
            rot = rng.uniform(-self.sigma_dir, self.sigma_dir)
            cos_r = math.cos(rot)
            sin_r = math.sin(rot)
            return scale * (ax * cos_r - ay * sin_r), scale * (ax * sin_r + ay * cos_r)
        return scale * ax, scale * ay

    def _extra_displacement(self, x: float, y: float) -> tuple:
        return 0.0, 0.0

    def step(self, state, action, rng) -> TransitionOutcome:
        x = float(state[0])
        y = float(state[1])
        dx, dy = self._noisy_displacement(action, rng)
        fx, fy = self._extra_displacement(x, y)
        nx = min(max(x + dx + fx, 0.0), self.arena_width)
        ny = min(max(y + dy + fy, 0.0), self.arena_height)
        gx = nx - self.goal[0]
        gy = ny - self.goal[1]
        terminal = gx * gx + gy * gy <= self.goal_radius * self.goal_radius
        return TransitionOutcome(np.array([nx, ny]), -1.0, terminal)


@dataclass(frozen=True)
class CorridorEnv(TeleporterEnv):
    """Teleporter with a straight assist corridor from the start toward the goal.

    Inside the corridor an external force pushes toward the goal; outside, a
    weaker force pushes away from it. The corridor segment stops
    ``corridor_end_margin`` units short of the goal so the final approach is
    force-free. Noise parameters match the teleporter.
    """

    corridor_half_width: float = 1.5
    inside_force_mag: float = 0.5
    outside_force_mag: float = 0.25
    corridor_end_margin: float = 1.0
    variant: str = "wide_corridor"

    @property
    def name(self) -> str:
        return self.variant

    @property
    def force_field(self) -> ForceField:
        start = np.asarray(self.start, dtype=float)
        goal = np.asarray(self.goal, dtype=float)
        axis = goal - start
        length = float(np.linalg.norm(axis))
        unit = axis / length
        return ForceField(
            corridor_axis=unit,
            corridor_center=start,
            corridor_half_width=self.corridor_half_width,
            inside_force=self.inside_force_mag * unit,
            outside_force=-self.outside_force_mag * unit,
            corridor_length=max(length - self.corridor_end_margin, 0.0) or None,
        )

    def _extra_displacement(self, x: float, y: float) -> tuple:
        # Inline ForceField.force_at for the hot path.
        sx, sy = self.start
        gx, gy = self.goal
        axn = gx - sx
        ayn = gy - sy
        norm = math.hypot(axn, ayn)
        ux = axn / norm
        uy = ayn / norm
        dx = x - sx
        dy = y - sy
        lateral = abs(dx * uy - dy * ux)
        along = dx * ux + dy * uy
        if lateral <= self.corridor_half_width and 0.0 <= along <= norm - self.corridor_end_margin:
            return self.inside_force_mag * ux, self.inside_force_mag * uy
        return -self.outside_force_mag * ux, -self.outside_force_mag * uy


def _params_dict(env) -> dict:
    return {f.name: getattr(env, f.name) for f in fields(env)}


ENVIRONMENT_NAMES = (
    "mountain_car",
    "pendulum",
    "random_teleporter",
    "wide_corridor",
    "narrow_corridor",
)


def make_environment(name: str, overrides: dict | None = None) -> Environment:
    """Build one of the shipped environments, optionally overriding parameters."""
    overrides = dict(overrides or {})
    if name == "mountain_car":
        return MountainCarEnv(**overrides)
    if name == "pendulum":
        return PendulumEnv(**overrides)
    if name == "random_teleporter":
        return TeleporterEnv(**overrides)
    if name == "wide_corridor":
        overrides.setdefault("corridor_half_width", 1.5)
        return CorridorEnv(variant="wide_corridor", **overrides)
    if name == "narrow_corridor":
        overrides.setdefault("corridor_half_width", 0.5)
        return CorridorEnv(variant="narrow_corridor", **overrides)
    raise ValueError(
        f"unknown environment {name!r}; expected one of {', '.join(ENVIRONMENT_NAMES)}"
    )
