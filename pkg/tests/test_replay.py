import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridmarl.oracles import chi_square_uniform
from hybridmarl.replay import ReplayBuffer, Transition


def item(k: float, n: int = 2) -> Transition:
    """Transition whose every field encodes ``k``."""
    return Transition(
        obs=[np.full(3, k) for _ in range(n)],
        discrete=[int(k) % 4] * n,
        params=np.full((n, 4), k / 1000.0),
        rewards=np.full(n, -k),
        next_obs=[np.full(3, k + 0.5) for _ in range(n)],
        dones=[False] * n,
    )


def test_push_into_empty_buffer():
    buf = ReplayBuffer(10)
    buf.push(item(1))
    assert len(buf) == 1


def test_capacity_two_keeps_last_two():
    buf = ReplayBuffer(2)
    for k in (1, 2, 3):
        buf.push(item(k))
    assert [t.rewards[0] for t in buf] == [-2.0, -3.0]


def test_iteration_is_insertion_order():
    buf = ReplayBuffer(100)
    for k in range(7):
        buf.push(item(k))
    assert [t.obs[0][0] for t in buf] == list(range(7))


def test_single_item_batch_returns_it():
    buf = ReplayBuffer(5)
    buf.push(item(4))
    b = buf.sample(1, np.random.default_rng(0))
    assert b.obs[1][0, 0] == 4.0 and b.rewards[0, 0] == -4.0 and b.next_obs[0][0, 0] == 4.5


def test_fixed_seed_gives_identical_batches():
    a, b = ReplayBuffer(50), ReplayBuffer(50)
    for k in range(30):
        a.push(item(k))
        b.push(item(k))
    x = a.sample(16, np.random.default_rng(9))
    y = b.sample(16, np.random.default_rng(9))
    assert np.array_equal(x.params, y.params) and np.array_equal(x.obs[0], y.obs[0])


def test_uniform_frequency_and_chi_square():
    buf = ReplayBuffer(10)
    for k in range(10):
        buf.push(item(k))
    rng = np.random.default_rng(0)
    idx = np.concatenate([buf.sample_indices(10, rng) for _ in range(10_000)])
    counts = np.bincount(idx, minlength=10)
    assert np.all(np.abs(counts / 100_000 - 0.1) <= 0.01)
    assert chi_square_uniform(counts) > 0.001


def test_sample_larger_than_buffer_rejected():
    buf = ReplayBuffer(10)
    buf.push(item(0))
    with pytest.raises(ValueError):
        buf.sample(2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        buf.sample(0, np.random.default_rng(0))


def test_malformed_transition_rejected():
    with pytest.raises(ValueError):
        Transition(obs=[np.zeros(3)] * 2, discrete=[0], params=np.zeros((2, 4)), rewards=[0, 0], next_obs=[np.zeros(3)] * 2, dones=[0, 0])
    with pytest.raises(ValueError):
        Transition(obs=[np.zeros(3)], discrete=[0], params=np.zeros((1, 4)), rewards=[0], next_obs=[np.zeros(4)], dones=[0])


def test_shape_change_rejected():
    buf = ReplayBuffer(10)
    buf.push(item(0, n=2))
    with pytest.raises(ValueError):
        buf.push(item(0, n=3))


def test_invalid_capacity():
    with pytest.raises(ValueError):
        ReplayBuffer(0)


def test_sampled_batch_is_a_copy():
    buf = ReplayBuffer(4)
    buf.push(item(1))
    b = buf.sample(1, np.random.default_rng(0))
    b.obs[0][:] = 99.0
    b.params[:] = 99.0
    assert buf[0].obs[0][0] == 1.0 and buf[0].params[0, 0] == 0.001


def test_executed_params_pick_discrete_branch():
    buf = ReplayBuffer(4)
    t = item(0)
    t.discrete = np.array([2, 3])
    t.params = np.arange(8.0).reshape(2, 4) / 10
    buf.push(t)
    assert np.allclose(buf.sample(1, np.random.default_rng(0)).executed_params(), [[0.2, 0.7]])


def test_growth_past_initial_allocation():
    buf = ReplayBuffer(5000)
    for k in range(3000):
        buf.push(item(k, n=1))
    assert len(buf) == 3000 and buf[2999].obs[0][0] == 2999.0


@settings(max_examples=40, deadline=None)
@given(capacity=st.integers(1, 12), pushes=st.integers(0, 40))
def test_size_bounded_and_eviction_oldest_first(capacity, pushes):
    buf = ReplayBuffer(capacity)
    for k in range(pushes):
        buf.push(item(k, n=1))
        assert len(buf) <= capacity
    kept = [t.obs[0][0] for t in buf]
    assert kept == list(range(max(0, pushes - capacity), pushes))


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**20), pushes=st.integers(1, 30))
def test_samples_are_bitwise_stored_rows(seed, pushes):
    buf = ReplayBuffer(16)
    for k in range(pushes):
        buf.push(item(k + 0.1234567, n=1))
    stored = {t.obs[0].tobytes() for t in buf}
    b = buf.sample(8, np.random.default_rng(seed)) if len(buf) >= 8 else buf.sample(1, np.random.default_rng(seed))
    assert all(row.tobytes() in stored for row in b.obs[0])
