"""2-D particle world with hybrid (direction, magnitude) force actions.

Two scenarios are provided:

``coop_nav``
    three agents, three landmarks; shared reward is minus the sum over
    landmarks of the nearest agent's distance, and each agent pays 1 per
    agent it overlaps.
``predator_prey``
    three predators (role ``adversary``), one prey (role ``agent``) and two
    static obstacles; a predator earns 10 per touch of the prey and the prey
    loses 10 per touch, plus a boundary penalty.

Controllable entities always come first in the entity arrays, so agent ``i``
is entity ``i``. Functions here are pure: ``step`` returns a fresh state.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

SCENARIOS = ("coop_nav", "predator_prey")
DIRECTIONS = ("x+", "x-", "y+", "y-")
_DIRECTION_VECTORS = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


@dataclass(frozen=True)
class ActionSpaceSpec:
    discrete_actions: tuple = DIRECTIONS
    continuous_range: tuple = (0.0, 1.0)

    @property
    def n_discrete(self) -> int:
        return len(self.discrete_actions)


ACTION_SPACE = ActionSpaceSpec()


@dataclass(frozen=True)
class HybridAction:
    discrete: int
    param: float

    def __post_init__(self):
        if not 0 <= int(self.discrete) < ACTION_SPACE.n_discrete:
            raise ValueError(f"discrete action {self.discrete} out of range")
        object.__setattr__(self, "discrete", int(self.discrete))
        object.__setattr__(self, "param", min(max(float(self.param), 0.0), 1.0))


@dataclass(frozen=True)
class WorldConfig:
    dt: float = 0.1
    damping: float = 0.25
    mass: float = 1.0
    contact_force: float = 100.0
    contact_margin: float = 0.001
    arena: float = 1.5
    spawn: float = 1.0
    episode_length: int = 25
    # action force multipliers ("sensitivity" in the particle-world family);
    # unit by default, the training harness raises them
    agent_accel: float = 1.0
    predator_accel: float = 1.0
    prey_accel: float = 1.0
    agent_radius: float = 0.05
    agent_max_speed: float = 1.3
    predator_radius: float = 0.075
    predator_max_speed: float = 1.0
    prey_radius: float = 0.05
    prey_max_speed: float = 1.3
    landmark_radius: float = 0.05
    obstacle_radius: float = 0.2
    n_agents: int = 3
    n_landmarks: int = 3
    n_predators: int = 3
    n_prey: int = 1
    n_obstacles: int = 2
    collision_penalty: float = 1.0
    touch_reward: float = 10.0


@dataclass
class WorldState:
    scenario: str
    pos: np.ndarray  # (E, 2)
    vel: np.ndarray  # (E, 2)
    roles: tuple  # per entity: "agent" | "adversary" | "landmark" | "obstacle"
    radius: np.ndarray  # (E,)
    max_speed: np.ndarray  # (E,), 0 for static entities
    accel: np.ndarray  # (E,) action force multiplier, 0 for static entities
    movable: np.ndarray  # (E,) bool
    collide: np.ndarray  # (E,) bool
    n_controlled: int
    step: int = 0

    def copy(self) -> "WorldState":
        return replace(self, pos=self.pos.copy(), vel=self.vel.copy())


@dataclass
class StepResult:
    observations: list
    rewards: np.ndarray
    dones: np.ndarray
    info: dict = field(default_factory=dict)


# ----------------------------------------------------------------- building


def _layout(scenario: str, cfg: WorldConfig):
    if scenario == "coop_nav":
        roles = ("agent",) * cfg.n_agents + ("landmark",) * cfg.n_landmarks
        radius = [cfg.agent_radius] * cfg.n_agents + [cfg.landmark_radius] * cfg.n_landmarks
        speed = [cfg.agent_max_speed] * cfg.n_agents + [0.0] * cfg.n_landmarks
        collide = [True] * cfg.n_agents + [False] * cfg.n_landmarks
        accel = [cfg.agent_accel] * cfg.n_agents + [0.0] * cfg.n_landmarks
        return roles, radius, speed, collide, accel, cfg.n_agents
    if scenario == "predator_prey":
        roles = ("adversary",) * cfg.n_predators + ("agent",) * cfg.n_prey + ("obstacle",) * cfg.n_obstacles
        radius = [cfg.predator_radius] * cfg.n_predators + [cfg.prey_radius] * cfg.n_prey + [cfg.obstacle_radius] * cfg.n_obstacles
        speed = [cfg.predator_max_speed] * cfg.n_predators + [cfg.prey_max_speed] * cfg.n_prey + [0.0] * cfg.n_obstacles
        collide = [True] * len(roles)
        accel = [cfg.predator_accel] * cfg.n_predators + [cfg.prey_accel] * cfg.n_prey + [0.0] * cfg.n_obstacles
        return roles, radius, speed, collide, accel, cfg.n_predators + cfg.n_prey
    raise ValueError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")


def make_state(scenario: str, pos, vel=None, cfg: WorldConfig = WorldConfig()) -> WorldState:
    """Build a state at explicit positions (tests, replays)."""
    roles, radius, speed, collide, accel, n_ctrl = _layout(scenario, cfg)
    pos = np.array(pos, dtype=np.float64).reshape(len(roles), 2)
    vel = np.zeros_like(pos) if vel is None else np.array(vel, dtype=np.float64).reshape(pos.shape)
    movable = np.array([r in ("agent", "adversary") for r in roles])
    return WorldState(
        scenario=scenario,
        pos=pos,
        vel=vel,
        roles=roles,
        radius=np.array(radius),
        max_speed=np.array(speed),
        accel=np.array(accel),
        movable=movable,
        collide=np.array(collide),
        n_controlled=n_ctrl,
    )


def reset(scenario: str, seed, cfg: WorldConfig = WorldConfig()):
    """Uniform placement in ``[-spawn, spawn]^2`` with zero velocities."""
    roles, *_ = _layout(scenario, cfg)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pos = rng.uniform(-cfg.spawn, cfg.spawn, size=(len(roles), 2))
    state = make_state(scenario, pos, cfg=cfg)
    return state, observe(state)


# ------------------------------------------------------------------ dynamics


def decode_action(act: HybridAction, spec: ActionSpaceSpec = ACTION_SPACE) -> np.ndarray:
    """Map ``(direction, magnitude)`` to a force vector with one nonzero component."""
    if not 0 <= act.discrete < spec.n_discrete:
        raise ValueError(f"discrete action {act.discrete} out of range")
    lo, hi = spec.continuous_range
    return _DIRECTION_VECTORS[act.discrete] * min(max(float(act.param), lo), hi)


def collision_forces(pos, radius, collide, movable, cfg: WorldConfig) -> np.ndarray:
    """Soft contact forces between every colliding pair.

    The penetration depth is smoothed as ``margin * softplus(-(d - r_sum) / margin)``
    and pushes along the centre line with stiffness ``contact_force``.
    """
    delta = pos[:, None, :] - pos[None, :, :]
    dist = np.sqrt((delta**2).sum(axis=-1))
    k = cfg.contact_margin
    penetration = np.logaddexp(0.0, -(dist - (radius[:, None] + radius[None, :])) / k) * k
    active = collide[:, None] & collide[None, :] & (movable[:, None] | movable[None, :]) & (dist > 0.0)
    scale = np.where(active, cfg.contact_force * penetration / np.where(dist > 0.0, dist, 1.0), 0.0)
    forces = (delta * scale[:, :, None]).sum(axis=1)
    forces[~movable] = 0.0
    return forces


def _integrate(state: WorldState, action_forces: np.ndarray, cfg: WorldConfig) -> WorldState:
    nxt = state.copy()
    forces = action_forces + collision_forces(state.pos, state.radius, state.collide, state.movable, cfg)
    mv = state.movable
    vel = nxt.vel
    vel[mv] = (1.0 - cfg.damping) * vel[mv] + forces[mv] * (cfg.dt / cfg.mass)
    speed = np.sqrt((vel**2).sum(axis=1))
    over = mv & (speed > state.max_speed)
    vel[over] *= (state.max_speed[over] / speed[over])[:, None]
    nxt.pos[mv] += vel[mv] * cfg.dt
    clipped = np.clip(nxt.pos, -cfg.arena, cfg.arena)
    vel[clipped != nxt.pos] = 0.0
    nxt.pos = clipped
    nxt.step = state.step + 1
    return nxt


def _pair_distances(pos):
    d = pos[:, None, :] - pos[None, :, :]
    return np.sqrt((d**2).sum(axis=-1))


def step(state: WorldState, joint, cfg: WorldConfig = WorldConfig()):
    """Advance one tick. Returns ``(next_state, StepResult)``."""
    if len(joint) != state.n_controlled:
        raise ValueError(f"expected {state.n_controlled} actions, got {len(joint)}")
    action_forces = np.zeros_like(state.pos)
    for i, act in enumerate(joint):
        action_forces[i] = state.accel[i] * decode_action(act)
    nxt = _integrate(state, action_forces, cfg)
    if state.scenario == "coop_nav":
        rewards, info = reward_coop_nav(nxt, cfg)
    else:
        rewards, info = reward_predator_prey(nxt, cfg)
    done = nxt.step >= cfg.episode_length
    result = StepResult(
        observations=observe(nxt),
        rewards=rewards,
        dones=np.full(state.n_controlled, done),
        info=info,
    )
    return nxt, result


# ------------------------------------------------------------------- rewards


def _roles_index(state: WorldState, role: str) -> np.ndarray:
    return np.array([i for i, r in enumerate(state.roles) if r == role], dtype=int)


def reward_coop_nav(state: WorldState, cfg: WorldConfig = WorldConfig()):
    agents = _roles_index(state, "agent")
    landmarks = _roles_index(state, "landmark")
    dist = _pair_distances(state.pos)
    min_dists = dist[landmarks][:, agents].min(axis=1)
    shared = -min_dists.sum()
    sub = dist[agents][:, agents]
    limit = state.radius[agents][:, None] + state.radius[agents][None, :]
    hits = (sub < limit) & ~np.eye(len(agents), dtype=bool)
    per_agent = hits.sum(axis=1)
    rewards = shared - cfg.collision_penalty * per_agent
    info = {
        "collisions": int(hits.sum() // 2),
        "min_dists": min_dists,
        "dist": float(min_dists.mean()),
        "touches": 0,
    }
    return rewards.astype(np.float64), info


def boundary_penalty(x: float) -> float:
    x = abs(x)
    if x < 0.9:
        return 0.0
    if x < 1.0:
        return (x - 0.9) * 10.0
    return float(min(np.exp(2.0 * x - 2.0), 10.0))


def reward_predator_prey(state: WorldState, cfg: WorldConfig = WorldConfig()):
    preds = _roles_index(state, "adversary")
    prey = _roles_index(state, "agent")
    dist = _pair_distances(state.pos)
    limit = state.radius[preds][:, None] + state.radius[prey][None, :]
    touching = dist[preds][:, prey] < limit  # (P, Q)
    rewards = np.zeros(state.n_controlled)
    rewards[preds] = cfg.touch_reward * touching.sum(axis=1)
    rewards[prey] = -cfg.touch_reward * touching.sum(axis=0)
    for q in prey:
        rewards[q] -= sum(boundary_penalty(c) for c in state.pos[q])
    info = {
        "collisions": int(touching.sum()),
        "touches": int(touching.sum()),
        "min_dists": dist[prey][:, preds].min(axis=1),
        "dist": float(dist[prey][:, preds].min()),
    }
    return rewards, info


# -------------------------------------------------------------- observations


def observe(state: WorldState) -> list[np.ndarray]:
    """Per-agent flat observation.

    ``[own vel, own pos, static entities - own pos, other agents - own pos]``,
    and in predator-prey the velocities of non-adversary agents are appended
    for everyone except those agents themselves.
    """
    pos, vel = state.pos, state.vel
    static = [j for j, r in enumerate(state.roles) if r in ("landmark", "obstacle")]
    obs = []
    for i in range(state.n_controlled):
        parts = [vel[i], pos[i]]
        parts += [pos[j] - pos[i] for j in static]
        others = [j for j in range(state.n_controlled) if j != i]
        parts += [pos[j] - pos[i] for j in others]
        if state.scenario == "predator_prey":
            parts += [vel[j] for j in others if state.roles[j] == "agent"]
        obs.append(np.concatenate(parts))
    return obs


def observation_dims(scenario: str, cfg: WorldConfig = WorldConfig()) -> list[int]:
    state, obs = reset(scenario, 0, cfg)
    return [len(o) for o in obs]


def agent_roles(scenario: str, cfg: WorldConfig = WorldConfig()) -> tuple:
    roles, *_, n_ctrl = _layout(scenario, cfg)
    return roles[:n_ctrl]


class ParticleWorld:
    """Stateful convenience wrapper around :func:`reset` / :func:`step`."""

    def __init__(self, scenario: str, cfg: WorldConfig = WorldConfig(), seed=None):
        _layout(scenario, cfg)
        self.scenario = scenario
        self.cfg = cfg
        self.rng = np.random.default_rng(seed)
        self.state = None

    @property
    def n_agents(self) -> int:
        return len(agent_roles(self.scenario, self.cfg))

    def reset(self):
        self.state, obs = reset(self.scenario, self.rng, self.cfg)
        return obs

    def step(self, joint) -> StepResult:
        self.state, result = step(self.state, joint, self.cfg)
        return result
