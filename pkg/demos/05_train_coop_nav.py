"""Short cooperative-navigation runs for all four learners, then greedy evaluation and a reward plot.

Run: python3 demos/05_train_coop_nav.py [episodes]   (default 200; a few minutes on one CPU)
"""
import sys
from dataclasses import replace

from hybridmarl import harness

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 200
base = harness.RunConfig(scenario="coop_nav", episodes=episodes, eval_episodes=0)

runs, reports = {}, []
for algo in harness.ALGOS:
    cfg = replace(base, algo=algo)
    result = harness.train(cfg)
    runs[algo] = result.rows
    report = harness.evaluate(result.agents, cfg.scenario, 50, (10_000,), cfg.world(), algo)
    reports.append(report)
    print(f"{algo:8s} last-50 mean reward {sum(r.reward_sum for r in result.rows[-50:]) / 50:8.2f}   {harness.summarize(report)}")

paths = harness.emit_outputs(runs, "runs/demo-coop-nav", reports)
print("wrote", ", ".join(str(p) for p in paths.values()))
