"""MLPs plus the categorical, tanh-Gaussian and hybrid policy heads.

All forward functions are written against :mod:`hybridmarl.autodiff` ops, so
they accept either numpy arrays (fast inference, no graph) or tape nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

LOG_SIGMA_MIN = -20.0
LOG_SIGMA_MAX = 2.0
SQUASH_EPS = 1e-6
HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


@dataclass
class MlpParams:
    """Weights ``(in, out)`` and biases ``(1, out)``; tanh between layers, linear output."""

    weights: list
    biases: list

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def hidden(self) -> list[int]:
        return self.sizes[1:-1]

    def arrays(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def n_params(self) -> int:
        return int(np.sum([a.size for a in self.arrays()]))

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def bind(self, tape: ad.Tape) -> "MlpParams":
        """Same network with every array registered as a leaf on ``tape``."""
        leaves = tape.leaves(self.arrays())
        return MlpParams(leaves[0::2], leaves[1::2])


def init_mlp(sizes, rng: np.random.Generator) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init for weights and biases."""
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(rng.uniform(-bound, bound, size=(1, n_out)))
    return MlpParams(weights, biases)


def mlp_forward(params: MlpParams, x):
    n_in = params.sizes[0]
    if ad.value_of(x).ndim != 2 or ad.value_of(x).shape[1] != n_in:
        raise ValueError(f"input shape {ad.value_of(x).shape} does not match first layer width {n_in}")
    h = x
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if k < last:
            h = ad.tanh(h)
    return h


# -------------------------------------------------------------------- heads


@dataclass
class GaussianHeadOut:
    mu: object
    log_sigma: object

    @property
    def sigma(self):
        return ad.exp(self.log_sigma)


@dataclass
class CategoricalHeadOut:
    logits: object

    def probs(self):
        return ad.softmax(self.logits)

    def log_probs(self):
        return ad.log(ad.softmax(self.logits))


@dataclass
class HybridPolicyOut:
    """Discrete head plus one 1-D Gaussian branch per discrete action (column k = branch k)."""

    discrete: CategoricalHeadOut
    continuous: GaussianHeadOut

    @property
    def n_discrete(self) -> int:
        return ad.value_of(self.discrete.logits).shape[-1]


def gaussian_head(mu, raw_log_sigma) -> GaussianHeadOut:
    return GaussianHeadOut(mu, ad.clip(raw_log_sigma, LOG_SIGMA_MIN, LOG_SIGMA_MAX))


def hybrid_head(raw, n_discrete: int) -> HybridPolicyOut:
    """Split a trunk output of width ``3 * n_discrete`` into the hybrid heads."""
    k = n_discrete
    if ad.value_of(raw).shape[-1] != 3 * k:
        raise ValueError(f"hybrid head expects width {3 * k}, got {ad.value_of(raw).shape[-1]}")
    return HybridPolicyOut(
        CategoricalHeadOut(raw[:, :k]),
        gaussian_head(raw[:, k : 2 * k], raw[:, 2 * k :]),
    )


def squashed_log_density(mu, log_sigma, u):
    """Elementwise log-density of ``tanh(u)`` where ``u ~ N(mu, sigma)``."""
    z = (u - mu) * ad.exp(-1.0 * log_sigma)
    gauss = -0.5 * ad.square(z) - log_sigma - HALF_LOG_2PI
    a = ad.tanh(u)
    return gauss - ad.log(1.0 - ad.square(a) + SQUASH_EPS)


def sample_squashed_gaussian(head: GaussianHeadOut, xi, per_dim: bool = False):
    """Reparameterized draw ``tanh(mu + sigma * xi)`` and its log-probability.

    ``log_prob`` is summed over the last axis (shape ``(B, 1)``) unless
    ``per_dim`` is set.
    """
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != ad.value_of(head.mu).shape:
        raise ValueError(f"noise shape {xi.shape} != mean shape {ad.value_of(head.mu).shape}")
    u = head.mu + head.sigma * xi
    action = ad.tanh(u)
    terms = squashed_log_density(head.mu, head.log_sigma, u)
    if per_dim:
        return action, terms
    return action, ad.sum(terms, axis=-1, keepdims=True)


def squashed_gaussian_log_prob(head: GaussianHeadOut, action, per_dim: bool = False):
    """Log-density of the squashed Gaussian evaluated at a given action in (-1, 1)."""
    u = np.arctanh(np.asarray(action, dtype=np.float64))
    terms = squashed_log_density(head.mu, head.log_sigma, u)
    return terms if per_dim else ad.sum(terms, axis=-1, keepdims=True)


# ------------------------------------------------------------ hybrid sampling


@dataclass
class HybridSample:
    discrete: np.ndarray  # (B,) int
    action: np.ndarray  # (B,) selected branch, in (-1, 1)
    branch_actions: np.ndarray  # (B, K) every branch, in (-1, 1)
    log_prob_d: np.ndarray  # (B,)
    log_prob_c: np.ndarray  # (B,)

    @property
    def log_prob(self) -> np.ndarray:
        return self.log_prob_d + self.log_prob_c


def sample_categorical(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cdf = np.cumsum(probs, axis=-1)
    r = rng.random((probs.shape[0], 1)) * cdf[:, -1:]
    idx = (r >= cdf).sum(axis=-1)
    return np.minimum(idx, probs.shape[-1] - 1)


def sample_hybrid(policy: HybridPolicyOut, rng: np.random.Generator) -> HybridSample:
    """Draw ``a^d ~ pi(.|s)`` then ``a^c`` from the branch the draw selected."""
    logits = ad.value_of(policy.discrete.logits)
    probs = ad.softmax(logits)
    idx = sample_categorical(probs, rng)
    rows = np.arange(len(idx))
    head = GaussianHeadOut(ad.value_of(policy.continuous.mu), ad.value_of(policy.continuous.log_sigma))
    xi = rng.standard_normal(head.mu.shape)
    branch_actions, terms = sample_squashed_gaussian(head, xi, per_dim=True)
    return HybridSample(
        discrete=idx,
        action=branch_actions[rows, idx],
        branch_actions=branch_actions,
        log_prob_d=np.log(np.maximum(probs[rows, idx], ad.LOG_FLOOR)),
        log_prob_c=terms[rows, idx],
    )


def hybrid_log_prob(policy: HybridPolicyOut, discrete: np.ndarray, action: np.ndarray):
    """Re-evaluate ``(log pi(a^d|s), log pi(a^c|s, a^d))`` at a given pair."""
    rows = np.arange(len(discrete))
    logp_d = ad.value_of(policy.discrete.log_probs())[rows, discrete]
    head = GaussianHeadOut(ad.value_of(policy.continuous.mu), ad.value_of(policy.continuous.log_sigma))
    full = np.tile(np.asarray(action, dtype=np.float64)[:, None], (1, policy.n_discrete))
    terms = squashed_gaussian_log_prob(head, full, per_dim=True)
    return logp_d, terms[rows, discrete]


def greedy_hybrid(policy: HybridPolicyOut):
    """Mode of the discrete head, mean of the pre-squash Gaussian."""
    idx = np.argmax(ad.value_of(policy.discrete.logits), axis=-1)
    branch_actions = np.tanh(ad.value_of(policy.continuous.mu))
    return idx, branch_actions


def hybrid_entropy(
    policy: HybridPolicyOut,
    alpha_d: float,
    alpha_c: float,
    mc_samples: int,
    rng: np.random.Generator,
    return_stderr: bool = False,
):
    """Weighted joint entropy ``alpha_d H(d) + alpha_c sum_d pi(d) H(c | d)`` per row.

    The discrete term is exact; each branch's differential entropy is the
    mean negative log-density over ``mc_samples`` reparameterized draws.
    """
    if mc_samples < 1:
        raise ValueError("mc_samples must be >= 1")
    if alpha_d < 0 or alpha_c < 0:
        raise ValueError("entropy weights must be nonnegative")
    probs = ad.softmax(ad.value_of(policy.discrete.logits))
    h_d = -(probs * np.log(np.maximum(probs, ad.LOG_FLOOR))).sum(axis=-1)
    mu = ad.value_of(policy.continuous.mu)
    log_sigma = ad.value_of(policy.continuous.log_sigma)
    xi = rng.standard_normal((mc_samples,) + mu.shape)
    u = mu + np.exp(log_sigma) * xi
    neg_logp = -squashed_log_density(mu, log_sigma, u)  # (M, B, K)
    h_c = neg_logp.mean(axis=0)
    total = alpha_d * h_d + alpha_c * (probs * h_c).sum(axis=-1)
    if not return_stderr:
        return total
    var_c = neg_logp.var(axis=0, ddof=1) if mc_samples > 1 else np.zeros_like(h_c)
    stderr = alpha_c * np.sqrt((probs**2 * var_c).sum(axis=-1) / mc_samples)
    return total, stderr
