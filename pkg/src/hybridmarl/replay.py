"""Uniform FIFO replay of joint multi-agent transitions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    """One joint step.

    ``params[j]`` holds agent ``j``'s continuous parameter for *every* discrete
    branch, in environment units ``[0, 1]``; the executed one is
    ``params[j, discrete[j]]``.
    """

    obs: list
    discrete: np.ndarray  # (n,) int
    params: np.ndarray  # (n, K)
    rewards: np.ndarray  # (n,)
    next_obs: list
    dones: np.ndarray  # (n,) bool

    def __post_init__(self):
        n = len(self.obs)
        self.discrete = np.asarray(self.discrete, dtype=np.int64)
        self.params = np.asarray(self.params, dtype=np.float64)
        self.rewards = np.asarray(self.rewards, dtype=np.float64)
        self.dones = np.asarray(self.dones, dtype=bool)
        lengths = {
            "next_obs": len(self.next_obs),
            "discrete": len(self.discrete),
            "params": len(self.params),
            "rewards": len(self.rewards),
            "dones": len(self.dones),
        }
        bad = {k: v for k, v in lengths.items() if v != n}
        if bad:
            raise ValueError(f"per-agent lengths disagree with {n} observations: {bad}")
        for o, o2 in zip(self.obs, self.next_obs):
            if np.shape(o) != np.shape(o2):
                raise ValueError("obs and next_obs shapes differ")


@dataclass
class Batch:
    """Struct-of-arrays view of sampled transitions (all arrays are copies)."""

    obs: list  # n arrays of (B, d_j)
    discrete: np.ndarray  # (B, n)
    params: np.ndarray  # (B, n, K)
    rewards: np.ndarray  # (B, n)
    next_obs: list
    dones: np.ndarray  # (B, n)

    def __len__(self):
        return len(self.rewards)

    @property
    def n_agents(self) -> int:
        return len(self.obs)

    def executed_params(self) -> np.ndarray:
        """(B, n) parameter of the branch each agent actually executed."""
        return np.take_along_axis(self.params, self.discrete[:, :, None], axis=2)[:, :, 0]


class ReplayBuffer:
    """Ring buffer; storage grows by doubling up to ``capacity``."""

    def __init__(self, capacity: int = 1_000_000):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.size = 0
        self.cursor = 0
        self._store = None
        self._dims = None

    def __len__(self):
        return self.size

    def _allocate(self, t: Transition, n_rows: int):
        n, k = t.params.shape
        store = {
            "discrete": np.zeros((n_rows, n), dtype=np.int64),
            "params": np.zeros((n_rows, n, k)),
            "rewards": np.zeros((n_rows, n)),
            "dones": np.zeros((n_rows, n), dtype=bool),
        }
        for j, o in enumerate(t.obs):
            store[f"obs{j}"] = np.zeros((n_rows, len(o)))
            store[f"next_obs{j}"] = np.zeros((n_rows, len(o)))
        return store

    def _grow(self):
        rows = len(self._store["rewards"])
        new_rows = min(self.capacity, 2 * rows)
        for key, arr in self._store.items():
            bigger = np.zeros((new_rows,) + arr.shape[1:], dtype=arr.dtype)
            bigger[:rows] = arr
            self._store[key] = bigger

    def push(self, t: Transition) -> None:
        dims = ([len(o) for o in t.obs], t.params.shape)
        if self._store is None:
            self._dims = dims
            self._store = self._allocate(t, min(self.capacity, 1024))
        elif dims != self._dims:
            raise ValueError(f"transition shape {dims} does not match buffer {self._dims}")
        if self.cursor >= len(self._store["rewards"]):
            self._grow()
        c = self.cursor
        s = self._store
        s["discrete"][c] = t.discrete
        s["params"][c] = t.params
        s["rewards"][c] = t.rewards
        s["dones"][c] = t.dones
        for j in range(len(t.obs)):
            s[f"obs{j}"][c] = t.obs[j]
            s[f"next_obs{j}"][c] = t.next_obs[j]
        self.cursor = (c + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _rows_in_order(self) -> np.ndarray:
        if self.size < self.capacity:
            return np.arange(self.size)
        return (self.cursor + np.arange(self.size)) % self.capacity

    def gather(self, rows) -> Batch:
        s = self._store
        n = len(self._dims[0])
        return Batch(
            obs=[s[f"obs{j}"][rows] for j in range(n)],
            discrete=s["discrete"][rows],
            params=s["params"][rows],
            rewards=s["rewards"][rows],
            next_obs=[s[f"next_obs{j}"][rows] for j in range(n)],
            dones=s["dones"][rows],
        )

    def __getitem__(self, k: int) -> Transition:
        """``k``-th oldest stored transition."""
        if not 0 <= k < self.size:
            raise IndexError(k)
        row = self._rows_in_order()[k]
        b = self.gather(np.array([row]))
        return Transition(
            obs=[o[0] for o in b.obs],
            discrete=b.discrete[0],
            params=b.params[0],
            rewards=b.rewards[0],
            next_obs=[o[0] for o in b.next_obs],
            dones=b.dones[0],
        )

    def __iter__(self):
        for k in range(self.size):
            yield self[k]

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} transitions, batch needs {batch_size}")
        return rng.integers(0, self.size, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform with-replacement draw."""
        return self.gather(self.sample_indices(batch_size, rng))
