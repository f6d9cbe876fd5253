import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridmarl import env
from hybridmarl.env import HybridAction, WorldConfig
from hybridmarl.oracles import two_body_trajectory

CFG = WorldConfig()
IDLE3 = [HybridAction(0, 0.0)] * 3
IDLE4 = [HybridAction(0, 0.0)] * 4

COOP_FAR = [[-1.0, -1.0], [1.0, 1.0], [1.0, -1.0], [0.0, 0.5], [-0.5, 0.0], [0.5, 0.0]]
PP_FAR = [[-1.0, -1.0], [1.0, 1.0], [1.0, -1.0], [0.0, 0.0], [-1.0, 1.0], [0.5, -0.6]]


# ------------------------------------------------------------------ actions


def test_action_space_has_four_directions():
    assert env.ACTION_SPACE.discrete_actions == ("x+", "x-", "y+", "y-")
    assert env.ACTION_SPACE.continuous_range == (0.0, 1.0)


@pytest.mark.parametrize(
    "act,force",
    [((0, 0.5), (0.5, 0.0)), ((3, 1.0), (0.0, -1.0)), ((1, 1.7), (-1.0, 0.0)), ((2, 0.25), (0.0, 0.25))],
)
def test_decode_action(act, force):
    assert np.array_equal(env.decode_action(HybridAction(*act)), force)


def test_invalid_discrete_rejected():
    with pytest.raises(ValueError):
        HybridAction(4, 0.5)


@settings(max_examples=200)
@given(d=st.integers(0, 3), p=st.floats(-10, 10))
def test_decode_image_has_one_component_of_magnitude_at_most_one(d, p):
    f = env.decode_action(HybridAction(d, p))
    assert np.count_nonzero(f) <= 1
    assert np.abs(f).max() <= 1.0


# -------------------------------------------------------------------- reset


def test_reset_is_deterministic():
    s1, o1 = env.reset("coop_nav", 5)
    s2, o2 = env.reset("coop_nav", 5)
    assert np.array_equal(s1.pos, s2.pos) and np.array_equal(s1.vel, s2.vel)
    assert all(np.array_equal(a, b) for a, b in zip(o1, o2))


def test_coop_nav_layout():
    s, obs = env.reset("coop_nav", 0)
    assert len(s.roles) == 6 and s.roles.count("agent") == 3 and s.roles.count("landmark") == 3
    assert not s.vel.any()
    assert np.abs(s.pos).max() <= 1.0
    assert [len(o) for o in obs] == env.observation_dims("coop_nav")


def test_predator_prey_layout():
    s, obs = env.reset("predator_prey", 0)
    assert s.roles.count("adversary") == 3 and s.roles.count("agent") == 1 and s.roles.count("obstacle") == 2
    assert [len(o) for o in obs] == env.observation_dims("predator_prey") == [16, 16, 16, 14]


def test_unknown_scenario():
    with pytest.raises(ValueError):
        env.reset("tag", 0)


# --------------------------------------------------------------------- step


def test_action_count_mismatch():
    s, _ = env.reset("coop_nav", 0)
    with pytest.raises(ValueError):
        env.step(s, IDLE4)


def test_zero_actions_zero_velocity_do_not_move():
    s = env.make_state("coop_nav", COOP_FAR)
    nxt, _ = env.step(s, IDLE3)
    assert np.array_equal(nxt.pos, s.pos)


def test_single_push_arithmetic():
    s = env.make_state("coop_nav", COOP_FAR)
    nxt, _ = env.step(s, [HybridAction(0, 1.0), HybridAction(0, 0.0), HybridAction(0, 0.0)])
    assert np.allclose(nxt.vel[0], [0.1, 0.0], atol=1e-15)
    assert np.allclose(nxt.pos[0] - s.pos[0], [0.01, 0.0], atol=1e-15)


def test_accel_scales_the_push():
    cfg = WorldConfig(agent_accel=5.0)
    s = env.make_state("coop_nav", COOP_FAR, cfg=cfg)
    nxt, _ = env.step(s, [HybridAction(2, 1.0)] + IDLE3[:2], cfg)
    assert np.allclose(nxt.vel[0], [0.0, 0.5], atol=1e-15)


def test_speed_is_clamped():
    cfg = WorldConfig(agent_accel=50.0)
    s = env.make_state("coop_nav", COOP_FAR, cfg=cfg)
    nxt, _ = env.step(s, [HybridAction(0, 1.0)] + IDLE3[:2], cfg)
    assert abs(np.linalg.norm(nxt.vel[0]) - 1.3) <= 1e-12


def test_overlapping_agents_are_penalized_and_separate():
    # head-on approach: the step ends with the pair overlapping (rewards use the post-step state)
    pos = [[0.0, 0.0], [0.2, 0.0], [1.0, 1.0], [0.8, 0.8], [-0.8, 0.8], [0.8, -0.8]]
    vel = [[1.0, 0.0], [-1.0, 0.0], [0, 0], [0, 0], [0, 0], [0, 0]]
    s = env.make_state("coop_nav", pos, vel)
    s, res = env.step(s, IDLE3)
    d = [np.linalg.norm(s.pos[0] - s.pos[1])]
    assert d[0] < 0.1 and res.info["collisions"] == 1
    assert res.rewards[0] - res.rewards[2] == -1.0 and res.rewards[1] == res.rewards[0]
    for _ in range(5):
        s, _ = env.step(s, IDLE3)
        d.append(np.linalg.norm(s.pos[0] - s.pos[1]))
    assert np.any(np.diff(d) > 0) and d[-1] > d[0]


def test_two_body_contact_matches_standalone_integration():
    pos = [[0.0, 0.0], [0.06, 0.02], [1.2, 1.2], [0.8, 0.8], [-0.8, 0.8], [0.8, -0.8]]
    vel = [[0.1, 0.0], [-0.2, 0.05], [0, 0], [0, 0], [0, 0], [0, 0]]
    s = env.make_state("coop_nav", pos, vel)
    got = []
    for _ in range(30):
        s, _ = env.step(s, IDLE3)
        got.append([*s.pos[0], *s.pos[1]])
    ref = two_body_trajectory(pos[0], pos[1], vel[0], vel[1], 30)
    assert np.max(np.abs(np.array(got) - np.array(ref))) <= 1e-9


def test_collision_forces_match_pairwise_loop():
    rng = np.random.default_rng(0)
    s, _ = env.reset("predator_prey", rng)
    s.pos[:] = rng.uniform(-0.3, 0.3, s.pos.shape)
    got = env.collision_forces(s.pos, s.radius, s.collide, s.movable, CFG)
    want = np.zeros_like(s.pos)
    for i, j in itertools.permutations(range(len(s.pos)), 2):
        if not (s.collide[i] and s.collide[j]) or not s.movable[i]:
            continue
        delta = s.pos[i] - s.pos[j]
        d = math.hypot(*delta)
        pen = CFG.contact_margin * math.log1p(math.exp(-(d - s.radius[i] - s.radius[j]) / CFG.contact_margin))
        want[i] += CFG.contact_force * pen * delta / d
    assert np.max(np.abs(got - want)) <= 1e-12


def test_done_after_episode_length():
    s, _ = env.reset("coop_nav", 0)
    for t in range(CFG.episode_length):
        s, res = env.step(s, IDLE3)
        assert res.dones.all() == (t == CFG.episode_length - 1)


# ------------------------------------------------------------------ rewards


def test_agents_on_distinct_landmarks_earn_zero():
    lm = [[0.5, 0.5], [-0.5, 0.5], [0.0, -0.5]]
    s = env.make_state("coop_nav", lm + lm)
    rewards, info = env.reward_coop_nav(s)
    assert np.array_equal(rewards, np.zeros(3)) and info["collisions"] == 0


def test_single_landmark_distance_five():
    cfg = WorldConfig(n_agents=1, n_landmarks=1, arena=10.0)
    s = env.make_state("coop_nav", [[0.0, 0.0], [3.0, 4.0]], cfg=cfg)
    rewards, _ = env.reward_coop_nav(s, cfg)
    assert rewards[0] == -5.0


@settings(max_examples=100)
@given(seed=st.integers(0, 2**32 - 1))
def test_coop_reward_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-1.5, 1.5, (6, 2))
    pos[1] = pos[0] + rng.uniform(-0.08, 0.08, 2)  # often overlapping
    s = env.make_state("coop_nav", pos)
    rewards, info = env.reward_coop_nav(s)
    shared = 0.0
    for lm in range(3, 6):
        shared -= min(math.dist(pos[a], pos[lm]) for a in range(3))
    hits = [0, 0, 0]
    pairs = 0
    for a, b in itertools.combinations(range(3), 2):
        if math.dist(pos[a], pos[b]) < 0.1:
            hits[a] += 1
            hits[b] += 1
            pairs += 1
    assert np.allclose(rewards, [shared - h for h in hits], atol=1e-12)
    assert info["collisions"] == pairs


def test_predator_prey_far_apart_rewards_zero():
    s = env.make_state("predator_prey", PP_FAR)
    rewards, info = env.reward_predator_prey(s)
    assert np.array_equal(rewards, np.zeros(4)) and info["touches"] == 0


def test_single_touch():
    pos = [list(p) for p in PP_FAR]
    pos[0] = [0.1, 0.0]
    s = env.make_state("predator_prey", pos)
    rewards, info = env.reward_predator_prey(s)
    assert list(rewards) == [10.0, 0.0, 0.0, -10.0] and info["touches"] == 1


def test_three_simultaneous_touches_count_independently():
    pos = [list(p) for p in PP_FAR]
    pos[0], pos[1], pos[2] = [0.1, 0.0], [-0.1, 0.0], [0.0, 0.1]
    s = env.make_state("predator_prey", pos)
    rewards, info = env.reward_predator_prey(s)
    assert list(rewards) == [10.0, 10.0, 10.0, -30.0] and info["touches"] == 3


@pytest.mark.parametrize("x,want", [(0.5, 0.0), (0.95, 0.5), (1.2, math.exp(0.4)), (2.0, math.exp(2.0)), (3.0, 10.0)])
def test_boundary_penalty(x, want):
    assert abs(env.boundary_penalty(x) - want) <= 1e-12
    assert env.boundary_penalty(-x) == env.boundary_penalty(x)


def test_prey_pays_boundary_penalty():
    pos = [list(p) for p in PP_FAR]
    pos[3] = [1.2, 0.0]
    rewards, _ = env.reward_predator_prey(env.make_state("predator_prey", pos))
    assert abs(rewards[3] + math.exp(0.4)) <= 1e-12


@settings(max_examples=50)
@given(seed=st.integers(0, 2**32 - 1))
def test_touch_symmetry(seed):
    rng = np.random.default_rng(seed)
    pos = rng.uniform(-0.2, 0.2, (6, 2))
    s = env.make_state("predator_prey", pos)
    rewards, info = env.reward_predator_prey(s)
    pred_touches = rewards[:3].sum() / 10.0
    prey_touched = -(rewards[3] + sum(env.boundary_penalty(c) for c in pos[3])) / 10.0
    assert pred_touches == pytest.approx(prey_touched) == info["touches"]


# -------------------------------------------------------------- invariants


def _random_rollout(scenario, seed, steps, cfg=CFG):
    rng = np.random.default_rng(seed)
    s, _ = env.reset(scenario, rng, cfg)
    n = s.n_controlled
    for _ in range(steps):
        joint = [HybridAction(int(d), float(p)) for d, p in zip(rng.integers(4, size=n), rng.random(n))]
        s, res = env.step(s, joint, cfg)
        yield s, res


@pytest.mark.parametrize("scenario", env.SCENARIOS)
def test_rollouts_are_bit_identical(scenario):
    a = [(s.pos.tobytes(), r.rewards.tobytes()) for s, r in _random_rollout(scenario, 11, 100)]
    b = [(s.pos.tobytes(), r.rewards.tobytes()) for s, r in _random_rollout(scenario, 11, 100)]
    assert a == b


@pytest.mark.parametrize("scenario", env.SCENARIOS)
def test_confinement_and_static_entities(scenario):
    cfg = WorldConfig(agent_accel=5.0, predator_accel=3.0, prey_accel=4.0, episode_length=10**9)
    s0, _ = env.reset(scenario, 3, cfg)
    static = ~s0.movable
    for s, res in _random_rollout(scenario, 3, 2000, cfg):
        assert np.abs(s.pos).max() <= cfg.arena
        assert np.array_equal(s.pos[static], s0.pos[static])
        assert not s.vel[static].any()
        assert np.isfinite(res.rewards).all()
        assert res.info["collisions"] >= 0 and res.info["touches"] >= 0


def test_observation_layout():
    s = env.make_state("coop_nav", COOP_FAR, vel=[[0.1, 0.2]] + [[0, 0]] * 5)
    o = env.observe(s)[0]
    assert np.allclose(o[:2], [0.1, 0.2]) and np.allclose(o[2:4], COOP_FAR[0])
    assert np.allclose(o[4:6], np.subtract(COOP_FAR[3], COOP_FAR[0]))
    assert np.allclose(o[10:12], np.subtract(COOP_FAR[1], COOP_FAR[0]))


def test_particle_world_wrapper_matches_functions():
    w = env.ParticleWorld("coop_nav", seed=9)
    obs = w.reset()
    s, obs2 = env.reset("coop_nav", 9)
    assert all(np.array_equal(a, b) for a, b in zip(obs, obs2))
    res = w.step(IDLE3)
    _, res2 = env.step(s, IDLE3)
    assert np.array_equal(res.rewards, res2.rewards)
