import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hybridmarl import autodiff as ad
from hybridmarl import nn
from hybridmarl.oracles import check_gradient, hybrid_entropy_reference


def test_parameter_count():
    net = nn.init_mlp([5, 64, 64, 12], np.random.default_rng(0))
    assert net.n_params() == 5 * 64 + 64 + 64 * 64 + 64 + 64 * 12 + 12
    assert net.hidden == [64, 64]


def test_init_bounds():
    net = nn.init_mlp([16, 8, 1], np.random.default_rng(0))
    assert np.abs(net.weights[0]).max() <= 0.25
    assert np.abs(net.weights[1]).max() <= 1 / math.sqrt(8)


def test_zero_network_outputs_zero():
    net = nn.MlpParams([np.zeros((3, 4)), np.zeros((4, 2))], [np.zeros((1, 4)), np.zeros((1, 2))])
    assert np.array_equal(nn.mlp_forward(net, np.ones((5, 3))), np.zeros((5, 2)))


def test_identity_layer_echoes_input():
    net = nn.MlpParams([np.eye(3)], [np.zeros((1, 3))])
    x = np.random.default_rng(0).standard_normal((4, 3))
    assert np.array_equal(nn.mlp_forward(net, x), x)


def test_forward_matches_hand_rolled_matrix_products():
    rng = np.random.default_rng(1)
    net = nn.init_mlp([6, 7, 5, 3], rng)
    x = rng.standard_normal((9, 6))
    h = np.tanh(x @ net.weights[0] + net.biases[0])
    h = np.tanh(h @ net.weights[1] + net.biases[1])
    expected = h @ net.weights[2] + net.biases[2]
    assert np.max(np.abs(nn.mlp_forward(net, x) - expected)) <= 1e-12


def test_forward_width_mismatch():
    net = nn.init_mlp([3, 4, 1], np.random.default_rng(0))
    with pytest.raises(ValueError):
        nn.mlp_forward(net, np.ones((2, 5)))


def test_copy_is_independent():
    net = nn.init_mlp([2, 3, 1], np.random.default_rng(0))
    twin = net.copy()
    twin.weights[0][0, 0] += 1.0
    assert net.weights[0][0, 0] != twin.weights[0][0, 0]


# ---------------------------------------------------------------- gaussian


def test_log_sigma_is_clamped():
    head = nn.gaussian_head(np.zeros((1, 3)), np.array([[-50.0, 0.0, 50.0]]))
    assert np.array_equal(head.log_sigma, [[-20.0, 0.0, 2.0]])


def test_zero_noise_gives_tanh_mean():
    mu = np.array([[0.3, -1.2]])
    action, _ = nn.sample_squashed_gaussian(nn.gaussian_head(mu, np.zeros((1, 2))), np.zeros((1, 2)))
    assert np.array_equal(action, np.tanh(mu))


def test_standard_normal_log_prob_at_zero():
    head = nn.gaussian_head(np.zeros((1, 1)), np.zeros((1, 1)))
    _, logp = nn.sample_squashed_gaussian(head, np.zeros((1, 1)))
    expected = -0.5 * math.log(2 * math.pi) - math.log(1.0 + 1e-6)
    assert abs(float(logp[0, 0]) - expected) <= 1e-12
    assert abs(float(logp[0, 0]) - (-0.918939)) <= 1e-5


@pytest.mark.parametrize("mu,log_sigma", [(0.0, 0.0), (0.7, -0.5), (-1.5, 0.4), (0.2, -1.5)])
def test_squashed_density_integrates_to_one(mu, log_sigma):
    # midpoint rule on 10^4 cells of (-1, 1)
    n = 10_000
    a = -1.0 + (np.arange(n) + 0.5) * (2.0 / n)
    head = nn.GaussianHeadOut(np.full((1, n), mu), np.full((1, n), log_sigma))
    logp = nn.squashed_gaussian_log_prob(head, a[None, :], per_dim=True)
    assert abs(np.exp(logp).sum() * (2.0 / n) - 1.0) <= 1e-3


def test_noise_shape_mismatch():
    head = nn.gaussian_head(np.zeros((2, 3)), np.zeros((2, 3)))
    with pytest.raises(ValueError):
        nn.sample_squashed_gaussian(head, np.zeros((2, 2)))


@settings(max_examples=50, deadline=None)
@given(
    mu=arrays(np.float64, (3, 4), elements=st.floats(-30, 30)),
    log_sigma=arrays(np.float64, (3, 4), elements=st.floats(-5, 2)),
    xi=arrays(np.float64, (3, 4), elements=st.floats(-5, 5)),
)
def test_squashed_actions_stay_in_open_interval(mu, log_sigma, xi):
    action, _ = nn.sample_squashed_gaussian(nn.gaussian_head(mu, log_sigma), xi)
    # tanh rounds to exactly +-1 in float64 beyond |u| ~ 19; the open-interval
    # guarantee is for the pre-rounding value, so check |u| small cases strictly
    u = mu + np.exp(log_sigma) * xi
    small = np.abs(u) < 18
    assert np.all(np.abs(action[small]) < 1.0)
    assert np.all(np.abs(action) <= 1.0)


def test_log_prob_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(20):
        mu = nn.MlpParams([rng.uniform(-1, 1, (1, 3))], [rng.uniform(-1, 1, (1, 3))])
        ls = nn.MlpParams([rng.uniform(-1, 1, (1, 3))], [rng.uniform(-1, 1, (1, 3))])
        xi = rng.standard_normal((2, 3))
        ones = np.ones((2, 1))

        def build(m, s):
            head = nn.gaussian_head(ones @ m.weights[0] + m.biases[0], ones @ s.weights[0] + s.biases[0])
            return ad.sum(nn.sample_squashed_gaussian(head, xi)[1])

        worst = max(worst, check_gradient(build, [mu, ls]))
    assert worst <= 1e-4


# --------------------------------------------------------------- categorical


@settings(max_examples=100, deadline=None)
@given(logits=arrays(np.float64, (2, 4), elements=st.floats(-300, 300)))
def test_softmax_is_a_probability_vector(logits):
    p = nn.CategoricalHeadOut(logits).probs()
    assert np.all(p >= 0)
    assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_equal_logits_sample_uniformly():
    policy = nn.hybrid_head(np.zeros((100_000, 12)), 4)
    sample = nn.sample_hybrid(policy, np.random.default_rng(0))
    freq = np.bincount(sample.discrete, minlength=4) / 100_000
    assert np.all(np.abs(freq - 0.25) <= 0.01)


def test_saturated_logit_always_drawn():
    raw = np.zeros((1000, 12))
    raw[:, :4] = [-50.0, 50.0, -50.0, -50.0]
    sample = nn.sample_hybrid(nn.hybrid_head(raw, 4), np.random.default_rng(0))
    assert np.all(sample.discrete == 1)


def test_hybrid_log_prob_factorizes():
    rng = np.random.default_rng(2)
    policy = nn.hybrid_head(rng.standard_normal((50, 12)), 4)
    s = nn.sample_hybrid(policy, rng)
    logp_d, logp_c = nn.hybrid_log_prob(policy, s.discrete, s.action)
    assert np.allclose(logp_d + logp_c, s.log_prob, atol=1e-9)


def test_hybrid_head_width_checked():
    with pytest.raises(ValueError):
        nn.hybrid_head(np.zeros((1, 10)), 4)


def test_branch_count_equals_discrete_count():
    policy = nn.hybrid_head(np.zeros((3, 12)), 4)
    assert policy.n_discrete == 4
    assert policy.continuous.mu.shape == (3, 4)


def test_greedy_is_mode_and_mean():
    raw = np.zeros((1, 12))
    raw[0, 2] = 3.0
    raw[0, 4:8] = [0.1, 0.2, 0.3, 0.4]
    idx, actions = nn.greedy_hybrid(nn.hybrid_head(raw, 4))
    assert idx[0] == 2
    assert np.array_equal(actions, np.tanh([[0.1, 0.2, 0.3, 0.4]]))


# ------------------------------------------------------------------ entropy


def _policy(logits, mu, log_sigma):
    return nn.hybrid_head(np.concatenate([logits, mu, log_sigma], axis=1), len(logits[0]))


def test_point_mass_entropy_is_zero():
    logits = np.array([[200.0, -200.0, -200.0, -200.0]])
    h = nn.hybrid_entropy(_policy(logits, np.zeros((1, 4)), np.zeros((1, 4))), 1.0, 0.0, 10, np.random.default_rng(0))
    assert abs(h[0]) <= 1e-12


def test_uniform_discrete_entropy_is_log4():
    h = nn.hybrid_entropy(_policy(np.zeros((1, 4)), np.zeros((1, 4)), np.zeros((1, 4))), 1.0, 0.0, 10, np.random.default_rng(0))
    assert abs(h[0] - 1.386294) <= 1e-6


def test_two_branch_entropy_matches_quadrature():
    logits = np.array([[0.4, -0.3]])
    mu = np.array([[0.5, -1.0]])
    log_sigma = np.array([[-0.3, 0.2]])
    est, se = nn.hybrid_entropy(_policy(logits, mu, log_sigma), 1.0, 1.0, 10_000, np.random.default_rng(0), return_stderr=True)
    ref = hybrid_entropy_reference(logits[0], mu[0], log_sigma[0], 1.0, 1.0)
    assert abs(est[0] - ref) <= 3 * se[0]


def test_entropy_rejects_zero_samples_and_negative_weights():
    p = _policy(np.zeros((1, 4)), np.zeros((1, 4)), np.zeros((1, 4)))
    with pytest.raises(ValueError):
        nn.hybrid_entropy(p, 1.0, 1.0, 0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        nn.hybrid_entropy(p, -1.0, 1.0, 5, np.random.default_rng(0))


@settings(max_examples=30, deadline=None)
@given(
    a1=st.floats(0, 2),
    a2=st.floats(0, 2),
    c=st.floats(0, 2),
    seed=st.integers(0, 2**16),
)
def test_entropy_monotone_in_discrete_weight(a1, a2, c, seed):
    rng = np.random.default_rng(seed)
    p = _policy(rng.standard_normal((1, 4)), rng.standard_normal((1, 4)), rng.uniform(-1, 0.5, (1, 4)))
    lo, hi = sorted([a1, a2])
    h_lo = nn.hybrid_entropy(p, lo, c, 50, np.random.default_rng(seed))
    h_hi = nn.hybrid_entropy(p, hi, c, 50, np.random.default_rng(seed))
    assert h_hi[0] >= h_lo[0] - 1e-12


@settings(max_examples=30, deadline=None)
@given(c1=st.floats(0, 2), c2=st.floats(0, 2), seed=st.integers(0, 2**16))
def test_entropy_monotone_in_continuous_weight_at_fixed_seed(c1, c2, seed):
    rng = np.random.default_rng(seed)
    # sigma near 1 keeps every branch entropy positive
    p = _policy(rng.standard_normal((1, 4)), rng.uniform(-0.5, 0.5, (1, 4)), rng.uniform(-0.2, 0.2, (1, 4)))
    lo, hi = sorted([c1, c2])
    h_lo = nn.hybrid_entropy(p, 0.5, lo, 200, np.random.default_rng(seed))
    h_hi = nn.hybrid_entropy(p, 0.5, hi, 200, np.random.default_rng(seed))
    assert h_hi[0] >= h_lo[0] - 1e-12
