"""Random hybrid actions in both particle-world scenarios.

Run: python3 demos/03_particle_world.py
"""
import numpy as np

from hybridmarl import env

rng = np.random.default_rng(2)
cfg = env.WorldConfig(agent_accel=5.0, predator_accel=3.0, prey_accel=4.0)

for scenario in env.SCENARIOS:
    world = env.ParticleWorld(scenario, cfg, seed=0)
    obs = world.reset()
    print(f"{scenario}: roles {env.agent_roles(scenario, cfg)}, observation sizes {[o.size for o in obs]}")
    total = np.zeros(world.n_agents)
    info = {"collisions": 0, "touches": 0}
    for t in range(25):
        joint = [env.HybridAction(int(rng.integers(4)), float(rng.random())) for _ in range(world.n_agents)]
        result = world.step(joint)
        total += result.rewards
        info["collisions"] += result.info["collisions"]
        info["touches"] += result.info["touches"]
    print("  reward per agent over 25 steps:", np.round(total, 2))
    print("  collisions", info["collisions"], "touches", info["touches"], "final mean landmark distance", round(result.info["dist"], 3))
    print("  positions stay inside the arena:", bool(np.all(np.abs(world.state.pos) <= cfg.arena)))
