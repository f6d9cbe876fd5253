"""The hybrid policy head: a categorical over 4 directions plus one squashed Gaussian per direction.

Run: python3 demos/02_hybrid_policy.py
"""
import numpy as np

from hybridmarl import nn

rng = np.random.default_rng(1)
K = 4

# a raw trunk output of width 3K: logits | means | log-stds
raw = np.array([[2.0, 0.0, 0.0, -1.0, 0.5, -0.3, 0.0, 1.2, -1.0, -0.5, -2.0, 0.0]])
policy = nn.hybrid_head(raw, K)
print("direction probabilities:", np.round(policy.discrete.probs(), 3))

draws = [nn.sample_hybrid(policy, rng) for _ in range(5000)]
counts = np.bincount([int(d.discrete[0]) for d in draws], minlength=K) / len(draws)
print("empirical frequencies:  ", np.round(counts, 3))

s = draws[0]
logp_d, logp_c = nn.hybrid_log_prob(policy, s.discrete, s.action)
print(f"one draw: direction {int(s.discrete[0])}, parameter {float(s.action[0]):+.3f} in (-1, 1)")
print("log-probability stored at sampling time vs re-evaluated:", float(s.log_prob[0]), float(logp_d[0] + logp_c[0]))

h = nn.hybrid_entropy(policy, 1.0, 1.0, mc_samples=20_000, rng=rng)
print("joint entropy H(d) + E_d H(c|d):", float(h[0]))

idx, branch = nn.greedy_hybrid(policy)
print("greedy action:", int(idx[0]), float(branch[0, idx[0]]))
