"""Save trained agents to the binary checkpoint format and evaluate them after reloading.

Run: python3 demos/07_checkpoint.py
"""
import tempfile
from pathlib import Path

from hybridmarl import checkpoint, harness

cfg = harness.RunConfig(algo="mahddpg", episodes=20, eval_episodes=0)
result = harness.train(cfg)
with tempfile.TemporaryDirectory() as d:
    path = checkpoint.save(Path(d) / "agents.ckpt", result.agents, {"config": cfg.__dict__})
    print("checkpoint bytes:", path.stat().st_size)
    before = harness.evaluate(result.agents, cfg.scenario, 10, (7,), cfg.world())
    after = harness.evaluate(path, cfg.scenario, 10, (7,))
print("greedy metrics before save:", harness.summarize(before))
print("greedy metrics after load: ", harness.summarize(after))
