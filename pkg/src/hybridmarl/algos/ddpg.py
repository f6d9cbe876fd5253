"""Hybrid DDPG: decentralized HDDPG and centralized MAHDDPG.

The actor emits four discrete-action values (softmax-normalized) and four
continuous parameters squashed to ``[0, 1]`` by ``(tanh + 1) / 2``. Execution
takes the argmax value paired with its parameter. The critic sees each
agent's action as ``one_hot(discrete) ++ params``; during the actor update
the agent's own one-hot is replaced by its live value vector so the critic's
gradient reaches both output groups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import AdamState
from ..nn import init_mlp, mlp_forward
from .common import N_DISCRETE, UpdateClock, apply_grads, next_joint_actions, one_hot, soft_update
from .common import train_step as _train_step

MODES = ("centralized", "decentralized")
ACTION_WIDTH = 2 * N_DISCRETE


@dataclass
class EpsilonSchedule:
    """Exploration rate; ``count`` is advanced by the training loop."""

    start: float = 1.0
    end: float = 0.1
    horizon: int = 10_000
    count: int = 0

    def __call__(self, u: int | None = None) -> float:
        return epsilon(self, self.count if u is None else u)


def epsilon(schedule: EpsilonSchedule, u: int) -> float:
    """Linear decay from ``start`` at ``u = 0`` to ``end`` at ``u = horizon``."""
    if u < 0:
        raise ValueError("update count must be nonnegative")
    if u >= schedule.horizon:
        return schedule.end
    frac = u / schedule.horizon
    return schedule.start + frac * (schedule.end - schedule.start)


@dataclass
class DdpgConfig:
    gamma: float = 0.95
    tau: float = 0.01
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    delay: int = 1
    mode: str = "centralized"
    hidden: tuple = (64, 64)
    eps_start: float = 1.0
    eps_end: float = 0.1
    eps_horizon: int = 10_000

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.actor_lr <= 0 or self.critic_lr <= 0 or self.delay < 1:
            raise ValueError("learning rates and delay must be positive")


def actor_outputs(actor, obs):
    """``(values (B, K), params (B, K))`` from the actor's two output groups."""
    raw = mlp_forward(actor, obs)
    values = ad.softmax(raw[:, :N_DISCRETE])
    params = 0.5 * ad.tanh(raw[:, N_DISCRETE:]) + 0.5
    return values, params


def select_action(values: np.ndarray, params: np.ndarray):
    """Argmax value (lowest index on ties) paired with its parameter."""
    idx = int(np.argmax(values))
    return idx, float(params[idx])


class DdpgAgent:
    family = "ddpg"

    def __init__(self, index: int, obs_dims, cfg: DdpgConfig = DdpgConfig(), rng=None):
        rng = np.random.default_rng(rng)
        self.index = index
        self.obs_dims = list(obs_dims)
        self.cfg = cfg
        hidden = list(cfg.hidden)
        self.actor = init_mlp([self.obs_dims[index]] + hidden + [ACTION_WIDTH], rng)
        self.critic = init_mlp([self.critic_input_dim()] + hidden + [1], rng)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = AdamState.for_params(self.actor.arrays(), lr=cfg.actor_lr)
        self.critic_opt = AdamState.for_params(self.critic.arrays(), lr=cfg.critic_lr)
        self.schedule = EpsilonSchedule(cfg.eps_start, cfg.eps_end, cfg.eps_horizon)
        self.updates = 0

    @property
    def algo(self) -> str:
        return "mahddpg" if self.cfg.mode == "centralized" else "hddpg"

    @property
    def centralized(self) -> bool:
        return self.cfg.mode == "centralized"

    def critic_input_dim(self) -> int:
        if self.centralized:
            return sum(self.obs_dims) + ACTION_WIDTH * len(self.obs_dims)
        return self.obs_dims[self.index] + ACTION_WIDTH

    def action_columns(self) -> slice:
        if self.centralized:
            start = sum(self.obs_dims) + ACTION_WIDTH * self.index
        else:
            start = self.obs_dims[self.index]
        return slice(start, start + ACTION_WIDTH)

    def critic_input(self, obs, discrete, params) -> np.ndarray:
        def action_block(j):
            return [one_hot(discrete[:, j]), params[:, j]]

        if self.centralized:
            blocks = list(obs)
            for j in range(len(obs)):
                blocks += action_block(j)
            return np.concatenate(blocks, axis=1)
        i = self.index
        return np.concatenate([obs[i]] + action_block(i), axis=1)

    # ------------------------------------------------------------ acting

    def act(self, obs, rng, explore: bool = True):
        if explore and rng.random() < self.schedule():
            return int(rng.integers(N_DISCRETE)), rng.random(N_DISCRETE)
        values, params = actor_outputs(self.actor, np.atleast_2d(obs))
        idx, _ = select_action(values[0], params[0])
        return idx, params[0]

    def next_action(self, next_obs, rng):
        values, params = actor_outputs(self.target_actor, next_obs)
        return np.argmax(values, axis=1), params, np.zeros(len(next_obs))

    # ------------------------------------------------------------ updates

    def critic_update(self, batch, agents, rng, cache=None):
        return critic_update(batch, agents, self.index, rng, cache)

    def actor_update(self, batch, agents, rng):
        return actor_update(batch, agents, self.index, rng)

    def end_cycle(self):
        soft_update(self.actor, self.target_actor, self.cfg.tau)
        soft_update(self.critic, self.target_critic, self.cfg.tau)
        self.updates += 1

    def networks(self) -> dict:
        return {
            "actor": self.actor,
            "critic": self.critic,
            "target_actor": self.target_actor,
            "target_critic": self.target_critic,
        }

    def optimizers(self) -> dict:
        return {"actor": self.actor_opt, "critic": self.critic_opt}


# ------------------------------------------------------------------ losses


def critic_loss(critic, x, y):
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    return ad.mean(ad.square(mlp_forward(critic, x) - y))


def actor_loss(actor, critic, obs_i, critic_x, cols: slice):
    """``-E[Q]`` with the agent's action columns replaced by its live output."""
    values, params = actor_outputs(actor, obs_i)
    x = ad.concat([critic_x[:, : cols.start], values, params, critic_x[:, cols.stop :]], axis=1)
    return -1.0 * ad.mean(mlp_forward(critic, x))


# --------------------------------------------------------------- operations


def critic_target(batch, agents, i: int, rng, cache=None) -> np.ndarray:
    agent = agents[i]
    discrete, params, _ = next_joint_actions(agents, batch, rng, cache)
    x = agent.critic_input(batch.next_obs, discrete, params)
    q = mlp_forward(agent.target_critic, x)[:, 0]
    mask = 1.0 - batch.dones[:, i].astype(np.float64)
    return batch.rewards[:, i] + agent.cfg.gamma * mask * q


def critic_update(batch, agents, i: int, rng, cache=None) -> float:
    agent = agents[i]
    y = critic_target(batch, agents, i, rng, cache)
    x = agent.critic_input(batch.obs, batch.discrete, batch.params)
    tape = ad.Tape()
    bound = agent.critic.bind(tape)
    loss = critic_loss(bound, x, y)
    apply_grads(tape, loss, bound, agent.critic, agent.critic_opt)
    return float(loss.value)


def actor_update(batch, agents, i: int, rng) -> float:
    agent = agents[i]
    critic_x = agent.critic_input(batch.obs, batch.discrete, batch.params)
    tape = ad.Tape()
    bound = agent.actor.bind(tape)
    loss = actor_loss(bound, agent.critic, batch.obs[i], critic_x, agent.action_columns())
    apply_grads(tape, loss, bound, agent.actor, agent.actor_opt)
    return float(loss.value)


def train_step(agents, buffer, cfg: DdpgConfig, clock: UpdateClock, rng, batch_size: int = 1024, owned=None):
    return _train_step(agents, buffer, clock, rng, batch_size, owned=owned, delay=cfg.delay)


def make_agents(obs_dims, cfg: DdpgConfig, rng) -> list[DdpgAgent]:
    return [DdpgAgent(i, obs_dims, cfg, rng) for i in range(len(obs_dims))]
