"""Hybrid soft actor-critic: decentralized HSAC and centralized MAHSAC.

Each agent owns a hybrid actor (categorical head over the four directions,
one tanh-Gaussian magnitude per direction), twin multi-head critics whose
output column ``k`` is the value of discrete action ``k``, and target copies
of all three networks.

Critic inputs:

* ``centralized``: every agent's observation followed by every agent's
  executed continuous parameter.
* ``decentralized``: the agent's own observation and executed parameter.

The actor objective is ``E[alpha_d log pi(d|o) + alpha_c log pi(c|o,d) - min Q]``,
with the expectation over ``d`` taken exactly under the current softmax and
``c`` reparameterized.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import AdamState
from ..nn import LOG_SIGMA_MAX, LOG_SIGMA_MIN, hybrid_head, init_mlp, mlp_forward, sample_hybrid, sample_squashed_gaussian
from .common import N_DISCRETE, UpdateClock, apply_grads, next_joint_actions, one_hot, soft_update
from .common import train_step as _train_step

MODES = ("centralized", "decentralized")


@dataclass
class SacConfig:
    gamma: float = 0.95
    tau: float = 0.01
    actor_lr: float = 1e-3
    critic_lr: float = 1e-3
    delay: int = 1
    mode: str = "centralized"
    alpha_d: float = 0.05
    alpha_c: float = 0.05
    hidden: tuple = (64, 64)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        if self.actor_lr <= 0 or self.critic_lr <= 0 or self.delay < 1:
            raise ValueError("learning rates and delay must be positive")
        if self.alpha_d < 0 or self.alpha_c < 0:
            raise ValueError("temperatures must be nonnegative")


def to_env(a):
    """Squashed action in (-1, 1) to an environment magnitude in (0, 1)."""
    return 0.5 * a + 0.5


class SacAgent:
    family = "sac"

    def __init__(self, index: int, obs_dims, cfg: SacConfig = SacConfig(), rng=None):
        rng = np.random.default_rng(rng)
        self.index = index
        self.obs_dims = list(obs_dims)
        self.cfg = cfg
        hidden = list(cfg.hidden)
        self.actor = init_mlp([self.obs_dims[index]] + hidden + [3 * N_DISCRETE], rng)
        n_in = self.critic_input_dim()
        self.critic1 = init_mlp([n_in] + hidden + [N_DISCRETE], rng)
        self.critic2 = init_mlp([n_in] + hidden + [N_DISCRETE], rng)
        self.target_actor = self.actor.copy()
        self.target_critic1 = self.critic1.copy()
        self.target_critic2 = self.critic2.copy()
        self.actor_opt = AdamState.for_params(self.actor.arrays(), lr=cfg.actor_lr)
        self.critic1_opt = AdamState.for_params(self.critic1.arrays(), lr=cfg.critic_lr)
        self.critic2_opt = AdamState.for_params(self.critic2.arrays(), lr=cfg.critic_lr)
        self.updates = 0

    @property
    def algo(self) -> str:
        return "mahsac" if self.cfg.mode == "centralized" else "hsac"

    @property
    def centralized(self) -> bool:
        return self.cfg.mode == "centralized"

    # ------------------------------------------------------------ layout

    def critic_input_dim(self) -> int:
        if self.centralized:
            return sum(self.obs_dims) + len(self.obs_dims)
        return self.obs_dims[self.index] + 1

    def action_column(self) -> int:
        """Column of this agent's own parameter inside the critic input."""
        if self.centralized:
            return sum(self.obs_dims) + self.index
        return self.obs_dims[self.index]

    def critic_input(self, obs, discrete, params) -> np.ndarray:
        """``obs``: list of (B, d_j); ``discrete``: (B, n); ``params``: (B, n, K)."""
        executed = np.take_along_axis(params, discrete[:, :, None], axis=2)[:, :, 0]
        if self.centralized:
            return np.concatenate(list(obs) + [executed], axis=1)
        i = self.index
        return np.concatenate([obs[i], executed[:, i : i + 1]], axis=1)

    # ------------------------------------------------------------ acting

    def policy(self, obs, target: bool = False):
        net = self.target_actor if target else self.actor
        return hybrid_head(mlp_forward(net, np.atleast_2d(obs)), N_DISCRETE)

    def act(self, obs, rng, explore: bool = True):
        """Returns ``(discrete, params (K,))`` in environment units."""
        k = N_DISCRETE
        raw = mlp_forward(self.actor, np.atleast_2d(obs))[0]
        logits, mu = raw[:k], raw[k : 2 * k]
        if not explore:
            return int(np.argmax(logits)), to_env(np.tanh(mu))
        # single-row fast path of sample_hybrid: no log-probs needed
        p = np.exp(logits - logits.max())
        idx = min(int(np.searchsorted(np.cumsum(p), rng.random() * p.sum(), side="right")), k - 1)
        sigma = np.exp(np.clip(raw[2 * k :], LOG_SIGMA_MIN, LOG_SIGMA_MAX))
        return idx, to_env(np.tanh(mu + sigma * rng.standard_normal(k)))

    def next_action(self, next_obs, rng):
        """Target-actor sample plus its weighted log-probability term."""
        s = sample_hybrid(self.policy(next_obs, target=True), rng)
        ent = self.cfg.alpha_d * s.log_prob_d + self.cfg.alpha_c * s.log_prob_c
        return s.discrete, to_env(s.branch_actions), ent

    # ------------------------------------------------------------ updates

    def critic_update(self, batch, agents, rng, cache=None):
        return critic_update(batch, agents, self.index, rng, cache)

    def actor_update(self, batch, agents, rng):
        return actor_update(batch, agents, self.index, rng)

    def end_cycle(self):
        soft_update(self.actor, self.target_actor, self.cfg.tau)
        soft_update(self.critic1, self.target_critic1, self.cfg.tau)
        soft_update(self.critic2, self.target_critic2, self.cfg.tau)
        self.updates += 1

    # ------------------------------------------------------------ persistence

    def networks(self) -> dict:
        return {
            "actor": self.actor,
            "critic1": self.critic1,
            "critic2": self.critic2,
            "target_actor": self.target_actor,
            "target_critic1": self.target_critic1,
            "target_critic2": self.target_critic2,
        }

    def optimizers(self) -> dict:
        return {"actor": self.actor_opt, "critic1": self.critic1_opt, "critic2": self.critic2_opt}


# ------------------------------------------------------------------ losses


def critic_loss(critic1, critic2, x, discrete_i, y):
    """Mean of the two twins' ``E[0.5 (Q - y)^2]``; returns ``(J, J1, J2)``."""
    sel = one_hot(discrete_i)
    y = np.asarray(y, dtype=np.float64).reshape(-1, 1)
    q1 = ad.sum(mlp_forward(critic1, x) * sel, axis=1, keepdims=True)
    q2 = ad.sum(mlp_forward(critic2, x) * sel, axis=1, keepdims=True)
    j1 = ad.mean(0.5 * ad.square(q1 - y))
    j2 = ad.mean(0.5 * ad.square(q2 - y))
    return 0.5 * (j1 + j2), j1, j2


def actor_loss(actor, critic1, critic2, obs_i, critic_x, col: int, xi, alpha_d: float, alpha_c: float):
    """Reparameterized hybrid actor objective at fixed noise ``xi`` (B, K).

    Agent ``i``'s parameter (column ``col`` of ``critic_x``) is replaced, for
    each branch ``k``, by the branch-``k`` sample, and the per-branch terms
    are weighted by ``pi(k|o)``.
    """
    b = len(obs_i)
    k = N_DISCRETE
    pol = hybrid_head(mlp_forward(actor, obs_i), k)
    probs = ad.softmax(pol.discrete.logits)
    logp_d = ad.log(probs)
    a, logp_c = sample_squashed_gaussian(pol.continuous, xi, per_dim=True)
    p_env = to_env(a)
    left, right = critic_x[:, :col], critic_x[:, col + 1 :]
    x = ad.concat([ad.concat([left, p_env[:, d : d + 1], right], axis=1) for d in range(k)], axis=0)
    q = ad.minimum(mlp_forward(critic1, x), mlp_forward(critic2, x))
    q_branch = ad.concat([q[d * b : (d + 1) * b, d : d + 1] for d in range(k)], axis=1)
    per_branch = alpha_d * logp_d + alpha_c * logp_c - q_branch
    return ad.mean(ad.sum(probs * per_branch, axis=1))


# --------------------------------------------------------------- operations


def critic_target(batch, agents, i: int, rng, cache=None) -> np.ndarray:
    """``y = r_i + gamma (1 - done_i) (min target Q(s', a') - alpha-weighted log pi(a'_i))``."""
    agent = agents[i]
    cfg = agent.cfg
    discrete, params, ent = next_joint_actions(agents, batch, rng, cache)
    x = agent.critic_input(batch.next_obs, discrete, params)
    sel = one_hot(discrete[:, i])
    q1 = (mlp_forward(agent.target_critic1, x) * sel).sum(axis=1)
    q2 = (mlp_forward(agent.target_critic2, x) * sel).sum(axis=1)
    bootstrap = np.minimum(q1, q2) - ent[i]
    mask = 1.0 - batch.dones[:, i].astype(np.float64)
    return batch.rewards[:, i] + cfg.gamma * mask * bootstrap


def critic_update(batch, agents, i: int, rng, cache=None) -> float:
    agent = agents[i]
    y = critic_target(batch, agents, i, rng, cache)
    x = agent.critic_input(batch.obs, batch.discrete, batch.params)
    tape = ad.Tape()
    c1, c2 = agent.critic1.bind(tape), agent.critic2.bind(tape)
    loss, _, _ = critic_loss(c1, c2, x, batch.discrete[:, i], y)
    grad_map = ad.backward(tape, loss)
    ad.adam_step(agent.critic1.arrays(), ad.grads_for(grad_map, c1.arrays()), agent.critic1_opt)
    ad.adam_step(agent.critic2.arrays(), ad.grads_for(grad_map, c2.arrays()), agent.critic2_opt)
    return float(loss.value)


def actor_update(batch, agents, i: int, rng) -> float:
    agent = agents[i]
    cfg = agent.cfg
    xi = rng.standard_normal((len(batch), N_DISCRETE))
    critic_x = agent.critic_input(batch.obs, batch.discrete, batch.params)
    tape = ad.Tape()
    bound = agent.actor.bind(tape)
    loss = actor_loss(
        bound, agent.critic1, agent.critic2, batch.obs[i], critic_x, agent.action_column(), xi, cfg.alpha_d, cfg.alpha_c
    )
    apply_grads(tape, loss, bound, agent.actor, agent.actor_opt)
    return float(loss.value)


def train_step(agents, buffer, cfg: SacConfig, clock: UpdateClock, rng, batch_size: int = 1024, owned=None):
    return _train_step(agents, buffer, clock, rng, batch_size, owned=owned, delay=cfg.delay)


def make_agents(obs_dims, cfg: SacConfig, rng) -> list[SacAgent]:
    return [SacAgent(i, obs_dims, cfg, rng) for i in range(len(obs_dims))]
