"""Predator-prey cross-play: predators trained with one learner, prey with another.

Run: python3 demos/06_crossplay.py [episodes]   (default 200)
"""
import sys

from hybridmarl import harness

episodes = int(sys.argv[1]) if len(sys.argv) > 1 else 200
cfg = harness.RunConfig(episodes=episodes, eval_episodes=50)

for predators, prey in [("mahsac", "hsac"), ("hsac", "mahsac"), ("mahddpg", "hddpg"), ("hddpg", "mahddpg")]:
    _, report = harness.crossplay(predators, prey, cfg)
    print(f"predators {predators:8s} vs prey {prey:8s}: {report.touches:.2f} touches per episode")
