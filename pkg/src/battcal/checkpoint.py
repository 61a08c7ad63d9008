"""Versioned, self-describing checkpoint files.

Plain JSON with sorted keys. Arrays are hex-encoded little-endian with an
explicit dtype tag, so files are endianness-independent and round-trips are
bit-exact. A checkpoint stores one or more components (actor, critic,
target_critic, regressor), each with layer dimensions, flattened parameters,
and optimizer moments, plus the Lagrange multipliers and run-config hash.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import KindMismatch, SchemaMismatch

FORMAT_VERSION = 1
KINDS = ("rl", "supervised")


def encode_array(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a)
    return {
        "dtype": a.dtype.name,
        "shape": list(a.shape),
        "hex": a.astype(a.dtype.newbyteorder("<"), copy=False).tobytes().hex(),
    }


def decode_array(d: dict) -> np.ndarray:
    try:
        dtype = np.dtype(d["dtype"]).newbyteorder("<")
        a = np.frombuffer(bytes.fromhex(d["hex"]), dtype=dtype)
        return a.reshape(d["shape"]).astype(d["dtype"])
    except (KeyError, ValueError, TypeError) as exc:
        raise SchemaMismatch(f"malformed array record: {exc}") from exc


def _net_record(net, optimizer=None) -> dict:
    rec = {
        "dims": list(net.dims),
        "final_activation": bool(net.final_activation),
        "dtype": net.dtype.name,
        "params": [encode_array(p) for p in net.parameters()],
    }
    if optimizer is not None:
        rec["adam"] = {
            "t": optimizer.t,
            "lr": optimizer.lr,
            "m": [encode_array(x) for x in optimizer.m],
            "v": [encode_array(x) for x in optimizer.v],
        }
    return rec


def _load_net(rec: dict, net, optimizer=None) -> None:
    if list(net.dims) != rec.get("dims"):
        raise SchemaMismatch(f"network dims {rec.get('dims')} do not match "
                             f"expected {list(net.dims)}")
    params = net.parameters()
    stored = rec.get("params", [])
    if len(stored) != len(params):
        raise SchemaMismatch("parameter array count mismatch")
    for p, d in zip(params, stored):
        a = decode_array(d)
        if a.shape != p.shape:
            raise SchemaMismatch(f"parameter shape {a.shape} != {p.shape}")
        p[...] = a.astype(net.dtype)
    if optimizer is not None and "adam" in rec:
        adam = rec["adam"]
        optimizer.t = int(adam["t"])
        optimizer.lr = float(adam["lr"])
        for dst, d in zip(optimizer.m, adam["m"]):
            dst[...] = decode_array(d).astype(net.dtype)
        for dst, d in zip(optimizer.v, adam["v"]):
            dst[...] = decode_array(d).astype(net.dtype)


def save_rl(path, agent, config_hash: str = "") -> None:
    """Write an actor + critic + target-critic checkpoint."""
    doc = {
        "version": FORMAT_VERSION,
        "kind": "rl",
        "config_hash": config_hash,
        "total_steps_trained": agent.total_steps_trained,
        "obs_dim": agent.obs_dim,
        "action_dim": agent.action_dim,
        "multipliers": {
            "log_beta": agent.multipliers.log_beta,
            "log_lam": agent.multipliers.log_lam,
            "max_value": agent.multipliers.max_value,
        },
        "components": {
            "actor": _net_record(agent.actor, agent.actor_opt),
            "critic": _net_record(agent.critic.net, agent.critic_opt),
            "target_critic": _net_record(agent.target_critic.net),
        },
    }
    _write(path, doc)


def load_rl(path, config_hash: str | None = None):
    """Load an RL checkpoint into a freshly constructed agent.

    Returns (agent, document). The agent is rebuilt from the stored layer
    dimensions with LacConfig defaults; training hyperparameters beyond the
    dimensions come from the caller's config, not the file.
    """
    from .lac import LacAgent, LacConfig

    doc = _read(path, expected_kind="rl", config_hash=config_hash)
    comps = doc["components"]
    dims = comps["actor"]["dims"]
    hidden = tuple(dims[1:-1])
    cfg = LacConfig(hidden=hidden, dtype=comps["actor"]["dtype"])
    agent = LacAgent(int(doc["obs_dim"]), int(doc["action_dim"]), cfg)
    _load_net(comps["actor"], agent.actor, agent.actor_opt)
    _load_net(comps["critic"], agent.critic.net, agent.critic_opt)
    _load_net(comps["target_critic"], agent.target_critic.net)
    mult = doc["multipliers"]
    agent.multipliers.log_beta = float(mult["log_beta"])
    agent.multipliers.log_lam = float(mult["log_lam"])
    agent.multipliers.max_value = float(mult["max_value"])
    agent.total_steps_trained = int(doc.get("total_steps_trained", 0))
    return agent, doc


def save_supervised(path, regressor, config_hash: str = "") -> None:
    doc = {
        "version": FORMAT_VERSION,
        "kind": "supervised",
        "config_hash": config_hash,
        "target": regressor.env_config.target,
        "components": {
            "regressor": _net_record(regressor.net),
        },
    }
    _write(path, doc)


def load_supervised(path, env_config, sup_config, config_hash: str | None = None):
    """Load a regressor checkpoint; architecture must match the configs."""
    from .baseline import Regressor

    doc = _read(path, expected_kind="supervised", config_hash=config_hash)
    reg = Regressor(env_config, sup_config)
    _load_net(doc["components"]["regressor"], reg.net)
    return reg, doc


def peek_kind(path) -> str:
    """Checkpoint kind without full validation."""
    doc = json.loads(Path(path).read_text())
    kind = doc.get("kind")
    if kind not in KINDS:
        raise SchemaMismatch(f"unknown checkpoint kind {kind!r}")
    return kind


def _write(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def _read(path, expected_kind: str, config_hash: str | None) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"checkpoint is not valid JSON: {exc}") from exc
    if doc.get("version") != FORMAT_VERSION:
        raise SchemaMismatch(f"unsupported checkpoint version "
                             f"{doc.get('version')!r}, expected {FORMAT_VERSION}")
    kind = doc.get("kind")
    if kind != expected_kind:
        raise KindMismatch(f"checkpoint kind {kind!r} cannot be used as "
                           f"{expected_kind!r}")
    if config_hash is not None and doc.get("config_hash") != config_hash:
        raise SchemaMismatch("checkpoint was produced by a different config")
    if "components" not in doc:
        raise SchemaMismatch("checkpoint missing components")
    return doc
