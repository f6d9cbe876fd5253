"""FIFO replay with uniform sampling.

Run: python3 demos/04_replay_buffer.py
"""
import numpy as np

from hybridmarl.replay import ReplayBuffer, Transition

rng = np.random.default_rng(3)
buf = ReplayBuffer(capacity=5)
for k in range(8):
    buf.push(Transition(
        obs=[np.full(2, k, float)],
        discrete=[k % 4],
        params=[np.full(4, k / 10)],
        rewards=[float(k)],
        next_obs=[np.full(2, k + 1, float)],
        dones=[False],
    ))

print("size", len(buf), "stored rewards (oldest first):", [float(t.rewards[0]) for t in buf])
batch = buf.sample(4, rng)
print("sampled rewards:", batch.rewards[:, 0])
print("executed parameters:", batch.executed_params()[:, 0])
idx = np.concatenate([buf.sample_indices(5, rng) for _ in range(4000)])
print("slot frequencies:", np.round(np.bincount(idx, minlength=5) / idx.size, 3))
