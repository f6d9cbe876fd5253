"""Binary checkpoints for a set of agents.

Layout (all integers little-endian)::

    magic      8 bytes  b"HMARLCK\\0"
    version    u16
    n_agents   u16
    per agent:
        algo tag   u8   (see ALGO_TAGS)
        meta_len   u32, then meta_len bytes of UTF-8 JSON (index, obs_dims, config, counters)
        n_arrays   u32
        shape table, one entry per array:
            name_len u16, name bytes, ndim u8, ndim x u32 dims
        array data, in table order, float64 little-endian, C order
    trailer_len u32, then UTF-8 JSON (run metadata, update clock, RNG state)
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .algos.ddpg import DdpgAgent, DdpgConfig
from .algos.sac import SacAgent, SacConfig

MAGIC = b"HMARLCK\0"
VERSION = 1
ALGO_TAGS = {"mahsac": 0, "hsac": 1, "mahddpg": 2, "hddpg": 3}
_TAG_NAMES = {v: k for k, v in ALGO_TAGS.items()}


class CheckpointError(ValueError):
    pass


def _agent_arrays(agent) -> dict[str, np.ndarray]:
    out = {}
    for net_name, net in agent.networks().items():
        for k, a in enumerate(net.arrays()):
            out[f"{net_name}.{k}"] = a
    for opt_name, opt in agent.optimizers().items():
        for k, (m, v) in enumerate(zip(opt.m, opt.v)):
            out[f"adam.{opt_name}.m.{k}"] = m
            out[f"adam.{opt_name}.v.{k}"] = v
    return out


def _agent_meta(agent) -> dict:
    cfg = asdict(agent.cfg)
    cfg["hidden"] = list(cfg["hidden"])
    meta = {
        "index": agent.index,
        "obs_dims": agent.obs_dims,
        "config": cfg,
        "updates": agent.updates,
        "adam": {name: {"t": o.t, "lr": o.lr, "beta1": o.beta1, "beta2": o.beta2, "eps": o.eps} for name, o in agent.optimizers().items()},
    }
    if agent.family == "ddpg":
        meta["epsilon_count"] = agent.schedule.count
    return meta


def _encode_str(s: str) -> bytes:
    b = s.encode("utf-8")
    return struct.pack("<I", len(b)) + b


def dumps(agents, extra: dict | None = None) -> bytes:
    parts = [MAGIC, struct.pack("<HH", VERSION, len(agents))]
    for agent in agents:
        parts.append(struct.pack("<B", ALGO_TAGS[agent.algo]))
        parts.append(_encode_str(json.dumps(_agent_meta(agent), sort_keys=True)))
        arrays = _agent_arrays(agent)
        parts.append(struct.pack("<I", len(arrays)))
        for name, a in arrays.items():
            nb = name.encode("utf-8")
            parts.append(struct.pack("<H", len(nb)) + nb + struct.pack("<B", a.ndim))
            parts.append(struct.pack(f"<{a.ndim}I", *a.shape))
        for a in arrays.values():
            parts.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    parts.append(_encode_str(json.dumps(extra or {}, sort_keys=True)))
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def string(self) -> str:
        (n,) = self.unpack("<I")
        return self.take(n).decode("utf-8")


def _build_agent(algo: str, meta: dict):
    cfg_fields = dict(meta["config"])
    cfg_fields["hidden"] = tuple(cfg_fields["hidden"])
    if algo in ("mahsac", "hsac"):
        agent = SacAgent(meta["index"], meta["obs_dims"], SacConfig(**cfg_fields), rng=0)
    else:
        agent = DdpgAgent(meta["index"], meta["obs_dims"], DdpgConfig(**cfg_fields), rng=0)
        agent.schedule.count = meta.get("epsilon_count", 0)
    if agent.algo != algo:
        raise CheckpointError(f"tag {algo} disagrees with stored mode {agent.cfg.mode}")
    agent.updates = meta["updates"]
    for name, opt in agent.optimizers().items():
        for key, val in meta["adam"][name].items():
            setattr(opt, key, val)
    return agent


def loads(data: bytes):
    """Returns ``(agents, extra)``."""
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("bad magic header")
    version, n_agents = r.unpack("<HH")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    agents = []
    for _ in range(n_agents):
        (tag,) = r.unpack("<B")
        if tag not in _TAG_NAMES:
            raise CheckpointError(f"unknown algorithm tag {tag}")
        meta = json.loads(r.string())
        agent = _build_agent(_TAG_NAMES[tag], meta)
        (n_arrays,) = r.unpack("<I")
        table = []
        for _ in range(n_arrays):
            (nlen,) = r.unpack("<H")
            name = r.take(nlen).decode("utf-8")
            (ndim,) = r.unpack("<B")
            table.append((name, r.unpack(f"<{ndim}I")))
        targets = _agent_arrays(agent)
        if [n for n, _ in table] != list(targets):
            raise CheckpointError("array table does not match the agent layout")
        for name, shape in table:
            dst = targets[name]
            if tuple(shape) != dst.shape:
                raise CheckpointError(f"{name}: stored shape {shape} != expected {dst.shape}")
            count = int(np.prod(shape))
            dst[...] = np.frombuffer(r.take(8 * count), dtype="<f8").reshape(shape)
        agents.append(agent)
    extra = json.loads(r.string())
    if r.pos != len(data):
        raise CheckpointError("trailing bytes after checkpoint")
    return agents, extra


def save(path, agents, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(dumps(agents, extra))
    return path


def load(path):
    return loads(Path(path).read_bytes())
