"""Command-line entry point: ``python -m hybridmarl {train,eval,crossplay,selftest}``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .env import SCENARIOS


def _common(p: argparse.ArgumentParser, algo: bool = True):
    p.add_argument("--scenario", choices=SCENARIOS)
    if algo:
        p.add_argument("--algo", choices=harness.ALGOS)
        p.add_argument("--algo-adversary", choices=harness.ALGOS, help="prey algorithm in predator_prey")
    p.add_argument("--episodes", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config", type=Path, help="flat 'key = value' file; flags override it")
    p.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridmarl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("train", help="train one configuration and write metrics, plot and checkpoint"))
    ev = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    _common(ev, algo=False)
    ev.add_argument("--checkpoint", type=Path, required=True)
    _common(sub.add_parser("crossplay", help="train predators (--algo) against prey (--algo-adversary) and count touches"))
    sub.add_parser("selftest", help="run the oracle suites")
    return parser


def _config(args, **forced) -> harness.RunConfig:
    overrides = {
        "scenario": args.scenario,
        "algo": getattr(args, "algo", None),
        "algo_adversary": getattr(args, "algo_adversary", None),
        "episodes": args.episodes,
        "seed": args.seed,
        "out_dir": str(args.out) if args.out else None,
    }
    overrides.update(forced)
    return harness.load_config(args.config, **overrides)


def _train(args) -> int:
    cfg = _config(args)
    if not cfg.out_dir:
        cfg = replace(cfg, out_dir="runs/" + f"{cfg.scenario}-{cfg.algo}-seed{cfg.seed}")
    result = harness.train(cfg)
    reports = []
    if cfg.eval_episodes > 0:
        reports.append(harness.evaluate(result.agents, cfg.scenario, cfg.eval_episodes, (cfg.seed + 10_000,), cfg.world(), cfg.algo))
    harness.emit_outputs({cfg.algo: result.rows}, cfg.out_dir, reports)
    last = result.rows[-1]
    print(f"trained {cfg.episodes} episodes, {result.updates} updates; last reward {last.reward_sum:.3f}; output in {cfg.out_dir}")
    for r in reports:
        print(harness.summarize(r))
    return 0


def _eval(args) -> int:
    cfg = _config(args)
    episodes = args.episodes or cfg.eval_episodes
    report = harness.evaluate(args.checkpoint, cfg.scenario, episodes, (cfg.seed,), label=str(args.checkpoint))
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        harness.write_eval_csv([report], args.out / "eval.csv")
    print(harness.summarize(report))
    return 0


def _crossplay(args) -> int:
    cfg = _config(args, scenario="predator_prey")
    if not cfg.out_dir:
        cfg = replace(cfg, out_dir="runs/" + f"crossplay-{cfg.algo}-vs-{cfg.algo_adversary or cfg.algo}-seed{cfg.seed}")
    result, report = harness.crossplay(cfg.algo, cfg.algo_adversary or cfg.algo, cfg)
    harness.emit_outputs({report.label.replace("/", "-vs-"): result.rows}, cfg.out_dir, [report])
    print(harness.summarize(report))
    return 0


def _selftest(_args) -> int:
    from .oracles import run_selftest

    return 0 if run_selftest() else 1


COMMANDS = {"train": _train, "eval": _eval, "crossplay": _crossplay, "selftest": _selftest}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad flags, 0 on --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except harness.ConfigError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
