"""Machinery shared by the SAC and DDPG families: soft updates, the delayed
update cycle, and critic-input layout helpers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..autodiff import AdamState, adam_step, backward, grads_for
from ..nn import MlpParams

N_DISCRETE = 4


def soft_update(live, target, tau: float):
    """``target <- tau * live + (1 - tau) * target`` elementwise, in place.

    Accepts two :class:`MlpParams` or two equal-length lists of arrays.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    live_arrays = live.arrays() if isinstance(live, MlpParams) else list(live)
    target_arrays = target.arrays() if isinstance(target, MlpParams) else list(target)
    if len(live_arrays) != len(target_arrays):
        raise ValueError("live and target parameter sets differ in length")
    for lv, tg in zip(live_arrays, target_arrays):
        if lv.shape != tg.shape:
            raise ValueError(f"shape mismatch in soft_update: {lv.shape} vs {tg.shape}")
        tg *= 1.0 - tau
        tg += tau * lv
    return target


def apply_grads(tape, loss, bound: MlpParams, live: MlpParams, opt: AdamState):
    grad_map = backward(tape, loss)
    adam_step(live.arrays(), grads_for(grad_map, bound.arrays()), opt)


@dataclass
class UpdateClock:
    """Counts completed update cycles (one per ``train_step``)."""

    updates: int = 0


def one_hot(idx: np.ndarray, k: int = N_DISCRETE) -> np.ndarray:
    out = np.zeros((len(idx), k))
    out[np.arange(len(idx)), idx] = 1.0
    return out


def train_step(agents, buffer, clock: UpdateClock, rng, batch_size: int, owned=None, delay: int = 1):
    """One delayed-update cycle.

    ``delay`` batches are drawn; every owned agent's critic is updated on each
    of them, then every owned actor on each of them, then all owned targets
    are soft-updated once.
    """
    owned = range(len(agents)) if owned is None else owned
    if delay < 1:
        raise ValueError("delay must be >= 1")
    batches = [buffer.sample(batch_size, rng) for _ in range(delay)]
    report = {i: {"critic": [], "actor": []} for i in owned}
    for batch in batches:
        nexts = {}
        for i in owned:
            report[i]["critic"].append(agents[i].critic_update(batch, agents, rng, nexts))
    for batch in batches:
        for i in owned:
            report[i]["actor"].append(agents[i].actor_update(batch, agents, rng))
    for i in owned:
        agents[i].end_cycle()
    clock.updates += 1
    return {i: {k: float(np.mean(v)) for k, v in r.items()} for i, r in report.items()}


def next_joint_actions(agents, batch, rng, cache: dict | None = None, only=None):
    """Next-state actions of every agent from its target actor.

    Returns ``(discrete (B, n), params (B, n, K), entropy_terms {j: (B,)})``.
    ``cache`` lets several critics share one draw per batch.
    """
    if cache is not None and "joint" in cache:
        return cache["joint"]
    who = range(len(agents)) if only is None else only
    b = len(batch)
    n = len(agents)
    discrete = np.zeros((b, n), dtype=np.int64)
    params = np.zeros((b, n, N_DISCRETE))
    ent = {}
    for j in who:
        d, p, e = agents[j].next_action(batch.next_obs[j], rng)
        discrete[:, j] = d
        params[:, j] = p
        ent[j] = e
    out = (discrete, params, ent)
    if cache is not None and only is None:
        cache["joint"] = out
    return out
