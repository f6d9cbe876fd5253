"""Training and evaluation orchestration, metrics, and output files."""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import checkpoint, env
from .algos.common import UpdateClock, train_step
from .algos.ddpg import DdpgAgent, DdpgConfig
from .algos.sac import SacAgent, SacConfig
from .replay import ReplayBuffer, Transition

ALGOS = ("mahsac", "hsac", "mahddpg", "hddpg")
METRIC_COLUMNS = ("episode", "reward_sum", "reward_ma100", "collisions", "dist", "touches", "ms")
EVAL_COLUMNS = ("label", "episodes", "collisions", "dist", "touches", "seeds")
MA_WINDOW = 100


@dataclass
class RunConfig:
    scenario: str = "coop_nav"
    algo: str = "mahsac"
    # predator_prey only: algorithm of the prey; predators use ``algo``
    algo_adversary: str = ""
    episodes: int = 2000
    max_steps: int = 25
    seed: int = 0
    out_dir: str = ""
    checkpoint_every: int = 0
    eval_episodes: int = 1000
    wallclock: bool = False
    # replay / schedule
    buffer_capacity: int = 1_000_000
    # desk-scale cadence: one update cycle every 10 env steps on 256-row batches
    batch_size: int = 256
    warmup: int = 1024
    train_every: int = 10
    # learners
    gamma: float = 0.95
    tau: float = 0.01
    actor_lr: float = 1e-2
    critic_lr: float = 1e-2
    delay: int = 1
    alpha_d: float = 0.01
    alpha_c: float = 0.001
    hidden: str = "64,64"
    eps_start: float = 1.0
    eps_end: float = 0.1
    eps_horizon: int = 10_000
    # world
    dt: float = 0.1
    damping: float = 0.25
    mass: float = 1.0
    contact_force: float = 100.0
    contact_margin: float = 0.001
    arena: float = 1.5
    # particle-world action sensitivities; see README "Physics scale"
    agent_accel: float = 5.0
    predator_accel: float = 3.0
    prey_accel: float = 4.0

    def __post_init__(self):
        if self.scenario not in env.SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")
        for a in (self.algo, self.algo_adversary or self.algo):
            if a not in ALGOS:
                raise ValueError(f"unknown algorithm {a!r}; expected one of {ALGOS}")
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.max_steps < 1 or self.batch_size < 1 or self.train_every < 1:
            raise ValueError("max_steps, batch_size and train_every must be >= 1")
        if self.warmup < self.batch_size:
            raise ValueError("warmup must be at least batch_size")
        self.hidden_sizes()

    def hidden_sizes(self) -> tuple:
        sizes = tuple(int(h) for h in str(self.hidden).split(",") if h.strip())
        if not sizes or min(sizes) < 1:
            raise ValueError(f"bad hidden sizes {self.hidden!r}")
        return sizes

    def world(self) -> env.WorldConfig:
        return env.WorldConfig(
            dt=self.dt,
            damping=self.damping,
            mass=self.mass,
            contact_force=self.contact_force,
            contact_margin=self.contact_margin,
            arena=self.arena,
            agent_accel=self.agent_accel,
            predator_accel=self.predator_accel,
            prey_accel=self.prey_accel,
            episode_length=self.max_steps,
        )

    def agent_algos(self) -> list[str]:
        roles = env.agent_roles(self.scenario, self.world())
        prey_algo = self.algo_adversary or self.algo
        return [prey_algo if (self.scenario == "predator_prey" and r == "agent") else self.algo for r in roles]


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, text: str):
    kind = _FIELD_TYPES[name]
    if kind == "bool":
        low = text.strip().lower()
        if low not in ("1", "0", "true", "false", "yes", "no"):
            raise ValueError(f"{name}: expected a boolean, got {text!r}")
        return low in ("1", "true", "yes")
    if kind == "int":
        return int(text)
    if kind == "float":
        return float(text)
    return text.strip()


def parse_config_text(text: str) -> dict:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


class ConfigError(ValueError):
    """Invalid run configuration (bad key, value or combination)."""


def load_config(path=None, **overrides) -> RunConfig:
    """Defaults, overridden by the file at ``path``, overridden by non-None ``overrides``."""
    try:
        values = parse_config_text(Path(path).read_text()) if path else {}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return RunConfig(**values)
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


# ----------------------------------------------------------------- agents


def make_agent(algo: str, index: int, obs_dims, cfg: RunConfig, rng):
    mode = "centralized" if algo.startswith("ma") else "decentralized"
    common = dict(
        gamma=cfg.gamma,
        tau=cfg.tau,
        actor_lr=cfg.actor_lr,
        critic_lr=cfg.critic_lr,
        delay=cfg.delay,
        mode=mode,
        hidden=cfg.hidden_sizes(),
    )
    if algo.endswith("sac"):
        return SacAgent(index, obs_dims, SacConfig(alpha_d=cfg.alpha_d, alpha_c=cfg.alpha_c, **common), rng)
    return DdpgAgent(
        index,
        obs_dims,
        DdpgConfig(eps_start=cfg.eps_start, eps_end=cfg.eps_end, eps_horizon=cfg.eps_horizon, **common),
        rng,
    )


def make_agents(cfg: RunConfig, rng) -> list:
    dims = env.observation_dims(cfg.scenario, cfg.world())
    return [make_agent(a, i, dims, cfg, rng) for i, a in enumerate(cfg.agent_algos())]


# ---------------------------------------------------------------- metrics


@dataclass
class MetricsRow:
    episode: int
    reward_sum: float
    reward_ma100: float
    collisions: int
    dist: float
    touches: int
    ms: float

    def as_list(self) -> list:
        return [getattr(self, c) for c in METRIC_COLUMNS]


@dataclass
class EvalReport:
    collisions: float
    dist: float
    touches: float
    episodes: int
    seeds: tuple = ()
    label: str = ""


@dataclass
class EpisodeStats:
    reward_sum: float = 0.0
    collisions: int = 0
    dist_total: float = 0.0
    touches: int = 0
    steps: int = 0

    def add(self, result: env.StepResult, team: list[int]):
        self.reward_sum += float(result.rewards[team].sum())
        self.collisions += result.info["collisions"]
        self.dist_total += result.info["dist"]
        self.touches += result.info["touches"]
        self.steps += 1

    @property
    def dist(self) -> float:
        return self.dist_total / max(self.steps, 1)


def team_indices(scenario: str, world: env.WorldConfig) -> list[int]:
    """Agents whose summed reward is reported: everyone in coop_nav, the predators otherwise."""
    roles = env.agent_roles(scenario, world)
    if scenario == "predator_prey":
        return [i for i, r in enumerate(roles) if r == "adversary"]
    return list(range(len(roles)))


def moving_average(values, window: int = MA_WINDOW) -> list[float]:
    """Trailing mean, NaN until ``window`` values exist."""
    out = []
    csum = np.cumsum(np.asarray(values, dtype=np.float64))
    for k in range(len(values)):
        if k + 1 < window:
            out.append(math.nan)
        else:
            lo = csum[k - window] if k >= window else 0.0
            out.append(float((csum[k] - lo) / window))
    return out


def run_episode(world: env.ParticleWorld, agents, rng, explore: bool, team, on_step=None) -> EpisodeStats:
    stats = EpisodeStats()
    obs = world.reset()
    for _ in range(world.cfg.episode_length):
        acts = [agent.act(o, rng, explore=explore) for agent, o in zip(agents, obs)]
        joint = [env.HybridAction(d, p[d]) for d, p in acts]
        result = world.step(joint)
        stats.add(result, team)
        if on_step is not None:
            on_step(obs, acts, result)
        obs = result.observations
    return stats


# ------------------------------------------------------------------ train


@dataclass
class TrainResult:
    config: RunConfig
    agents: list
    rows: list[MetricsRow]
    checkpoint_path: Path | None = None
    updates: int = 0
    losses: list = field(default_factory=list)


def _streams(seed: int):
    env_ss, init_ss, act_ss, learn_ss = np.random.SeedSequence(seed).spawn(4)
    return (
        np.random.default_rng(env_ss),
        np.random.default_rng(init_ss),
        np.random.default_rng(act_ss),
        np.random.default_rng(learn_ss),
    )


def _metrics_writer(path: Path):
    fh = path.open("w", newline="")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(METRIC_COLUMNS)
    return fh, writer


def format_row(row: MetricsRow) -> list[str]:
    return [repr(v) if isinstance(v, float) else str(v) for v in row.as_list()]


def train(cfg: RunConfig, progress=None) -> TrainResult:
    """Run ``cfg.episodes`` episodes of rollout + learning.

    Metrics rows are appended to ``<out_dir>/metrics.csv`` as episodes finish
    when ``out_dir`` is set; a checkpoint is written every
    ``checkpoint_every`` episodes and at the end.
    """
    world_cfg = cfg.world()
    env_rng, init_rng, act_rng, learn_rng = _streams(cfg.seed)
    world = env.ParticleWorld(cfg.scenario, world_cfg, seed=env_rng)
    agents = make_agents(cfg, init_rng)
    buffer = ReplayBuffer(cfg.buffer_capacity)
    clock = UpdateClock()
    team = team_indices(cfg.scenario, world_cfg)
    out = Path(cfg.out_dir) if cfg.out_dir else None
    fh = writer = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        fh, writer = _metrics_writer(out / "metrics.csv")
    rows: list[MetricsRow] = []
    rewards: list[float] = []
    losses = []
    steps = 0

    def on_step(obs, acts, result):
        nonlocal steps
        buffer.push(
            Transition(
                obs=obs,
                discrete=[d for d, _ in acts],
                params=[p for _, p in acts],
                rewards=result.rewards,
                next_obs=result.observations,
                dones=result.dones,
            )
        )
        steps += 1
        for agent in agents:
            if agent.family == "ddpg":
                agent.schedule.count = steps
        if len(buffer) >= cfg.warmup and steps % cfg.train_every == 0:
            losses.append(train_step(agents, buffer, clock, learn_rng, cfg.batch_size, delay=cfg.delay))

    ckpt_path = None
    try:
        for ep in range(1, cfg.episodes + 1):
            t0 = time.perf_counter()
            stats = run_episode(world, agents, act_rng, True, team, on_step)
            rewards.append(stats.reward_sum)
            ma = float(np.mean(rewards[-MA_WINDOW:])) if ep >= MA_WINDOW else math.nan
            ms = (time.perf_counter() - t0) * 1e3 if cfg.wallclock else 0.0
            row = MetricsRow(ep, stats.reward_sum, ma, stats.collisions, stats.dist, stats.touches, ms)
            rows.append(row)
            if writer is not None:
                writer.writerow(format_row(row))
                fh.flush()
            if out is not None and cfg.checkpoint_every and ep % cfg.checkpoint_every == 0:
                ckpt_path = save_checkpoint(out / "checkpoint.bin", agents, cfg, clock, learn_rng, ep)
            if progress is not None:
                progress(row)
    finally:
        if fh is not None:
            fh.close()
    if out is not None:
        ckpt_path = save_checkpoint(out / "checkpoint.bin", agents, cfg, clock, learn_rng, cfg.episodes)
    return TrainResult(cfg, agents, rows, ckpt_path, clock.updates, losses)


def save_checkpoint(path, agents, cfg: RunConfig, clock: UpdateClock, rng, episode: int) -> Path:
    extra = {
        "config": asdict(cfg),
        "episode": episode,
        "updates": clock.updates,
        "rng_state": rng.bit_generator.state,
    }
    return checkpoint.save(path, agents, extra)


# --------------------------------------------------------------- evaluate


def evaluate(agents, scenario: str, episodes: int, seeds=(0,), world_cfg: env.WorldConfig | None = None, label: str = "") -> EvalReport:
    """Greedy rollouts; averages are per episode over every (seed, episode).

    ``agents`` may also be a checkpoint path.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if isinstance(agents, (str, Path)):
        agents, extra = checkpoint.load(agents)
        if world_cfg is None and "config" in extra:
            world_cfg = RunConfig(**extra["config"]).world()
    world_cfg = world_cfg or RunConfig().world()
    dims = env.observation_dims(scenario, world_cfg)
    if len(agents) != len(dims) or any(a.obs_dims != dims for a in agents):
        raise ValueError(f"checkpoint agents do not match scenario {scenario!r}")
    team = team_indices(scenario, world_cfg)
    totals = []
    for seed in seeds:
        env_rng, _, act_rng, _ = _streams(seed)
        world = env.ParticleWorld(scenario, world_cfg, seed=env_rng)
        for _ in range(episodes):
            s = run_episode(world, agents, act_rng, False, team)
            totals.append((s.collisions, s.dist, s.touches))
    arr = np.array(totals, dtype=np.float64)
    return EvalReport(
        collisions=float(arr[:, 0].mean()),
        dist=float(arr[:, 1].mean()),
        touches=float(arr[:, 2].mean()),
        episodes=len(totals),
        seeds=tuple(seeds),
        label=label,
    )


def crossplay(predator_algo: str, prey_algo: str, cfg: RunConfig | None = None, eval_seeds=None) -> tuple[TrainResult, EvalReport]:
    """Train predators with one algorithm against a prey with another, then count touches."""
    cfg = replace(cfg or RunConfig(), scenario="predator_prey", algo=predator_algo, algo_adversary=prey_algo)
    result = train(cfg)
    seeds = eval_seeds if eval_seeds is not None else (cfg.seed + 10_000,)
    report = evaluate(result.agents, "predator_prey", cfg.eval_episodes, seeds, cfg.world(), f"{predator_algo}/{prey_algo}")
    return result, report


def random_policy_rewards(scenario: str, episodes: int, seed: int, world_cfg: env.WorldConfig | None = None) -> list[float]:
    """Team reward per episode under uniformly random hybrid actions."""
    world_cfg = world_cfg or RunConfig().world()
    env_rng, _, act_rng, _ = _streams(seed)
    world = env.ParticleWorld(scenario, world_cfg, seed=env_rng)
    team = team_indices(scenario, world_cfg)

    class _Random:
        def act(self, obs, rng, explore=True):
            return int(rng.integers(4)), rng.random(4)

    agents = [_Random() for _ in range(world.n_agents)]
    return [run_episode(world, agents, act_rng, True, team).reward_sum for _ in range(episodes)]


# ---------------------------------------------------------------- outputs


def write_metrics_csv(rows, path) -> Path:
    path = Path(path)
    fh, writer = _metrics_writer(path)
    with fh:
        for row in rows:
            writer.writerow(format_row(row))
    return path


def read_metrics_csv(path) -> list[MetricsRow]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != METRIC_COLUMNS:
            raise ValueError(f"unexpected metrics header {header}")
        return [
            MetricsRow(int(r[0]), float(r[1]), float(r[2]), int(r[3]), float(r[4]), int(r[5]), float(r[6]))
            for r in reader
        ]


def write_eval_csv(reports, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVAL_COLUMNS)
        for r in reports:
            writer.writerow([r.label, r.episodes, repr(r.collisions), repr(r.dist), repr(r.touches), " ".join(map(str, r.seeds))])
    return path


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")


def reward_curve_svg(runs: dict, width: int = 640, height: int = 400) -> str:
    """One polyline per run of the trailing (up to 100-episode) mean reward."""
    margin = 50
    curves = {}
    for label, rows in runs.items():
        r = np.array([row.reward_sum for row in rows], dtype=np.float64)
        csum = np.cumsum(r)
        k = np.arange(1, len(r) + 1)
        win = np.minimum(k, MA_WINDOW)
        lo = np.where(k > MA_WINDOW, csum[np.maximum(k - MA_WINDOW - 1, 0)], 0.0)
        curves[label] = ([row.episode for row in rows], (csum - lo) / win)
    xs = np.concatenate([np.asarray(x, dtype=float) for x, _ in curves.values()])
    ys = np.concatenate([y for _, y in curves.values()])
    x0, x1 = xs.min(), max(xs.max(), xs.min() + 1)
    y0, y1 = ys.min(), ys.max()
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 1.0, y1 + 1.0

    def sx(x):
        return margin + (x - x0) / (x1 - x0) * (width - 2 * margin)

    def sy(y):
        return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">episode</text>',
        f'<text x="14" y="{height / 2}" font-size="12" transform="rotate(-90 14 {height / 2})" text-anchor="middle">reward (100-episode mean)</text>',
        f'<text x="{margin - 4}" y="{sy(y1):.1f}" text-anchor="end" font-size="10">{y1:.1f}</text>',
        f'<text x="{margin - 4}" y="{sy(y0):.1f}" text-anchor="end" font-size="10">{y0:.1f}</text>',
    ]
    for k, (label, (ex, ey)) in enumerate(curves.items()):
        color = _PALETTE[k % len(_PALETTE)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(ex, ey))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"><title>{label}</title></polyline>')
        ly = margin + 16 * k
        out.append(f'<g class="legend"><line x1="{width - margin - 120}" y1="{ly}" x2="{width - margin - 100}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - margin - 95}" y="{ly + 4}" font-size="11">{label}</text></g>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_outputs(runs, out_dir, reports=()) -> dict:
    """Write metrics CSV(s), ``eval.csv`` and ``reward_curve.svg``.

    ``runs`` maps a label to its metrics rows (a bare list is one run). A
    single run goes to ``metrics.csv``; several go to ``metrics-<label>.csv``.
    """
    if not isinstance(runs, dict):
        runs = {"run": list(runs)}
    if not runs or any(len(rows) == 0 for rows in runs.values()):
        raise ValueError("every run needs at least one metrics row")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for label, rows in runs.items():
        name = "metrics.csv" if len(runs) == 1 else f"metrics-{label}.csv"
        written[label] = write_metrics_csv(rows, out / name)
    written["eval"] = write_eval_csv(reports, out / "eval.csv")
    svg = out / "reward_curve.svg"
    svg.write_text(reward_curve_svg(runs))
    written["svg"] = svg
    return written


def summarize(report: EvalReport) -> str:
    return json.dumps(asdict(report), sort_keys=True)
