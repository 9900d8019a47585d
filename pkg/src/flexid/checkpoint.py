"""Versioned JSON checkpoints for trained stacks.

The document stores the world/architecture/training configs, run
metadata, and every named parameter as a shape plus a decimal list.
Python's repr round-trips float64 exactly, so save -> load -> generate
is bit-identical to generating before the save.  Loading rebuilds the
world deterministically from its config and validates every parameter
shape against a fresh initialization layout.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .model import ArchConfig, TrainedStack, init_params
from .rng import RngStream
from .tensor import Tensor
from .training import TrainConfig
from .world import WorldConfig, make_world

FORMAT_VERSION = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _config_dicts(stack: TrainedStack) -> dict:
    return {
        "world": asdict(stack.world.config),
        "arch": asdict(stack.arch),
        "train": asdict(stack.train_config),
    }


def train_key(world_cfg: WorldConfig, arch: ArchConfig, train_cfg: TrainConfig) -> str:
    """Stable hash of everything a training run depends on."""
    blob = canonical_json({
        "world": asdict(world_cfg),
        "arch": asdict(arch),
        "train": asdict(train_cfg),
    })
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def save_checkpoint(stack: TrainedStack, path) -> None:
    doc = {
        "format_version": FORMAT_VERSION,
        "config_hash": train_key(stack.world.config, stack.arch, stack.train_config),
        "seed": stack.train_config.seed,
        "metadata": stack.metadata,
        "configs": _config_dicts(stack),
        "params": {
            name: {"shape": list(p.shape), "data": p.data.reshape(-1).tolist()}
            for name, p in sorted(stack.params.items())
        },
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="utf-8")


def _dataclass_from(cls, data: dict, where: str):
    names = {f for f in cls.__dataclass_fields__}
    unknown = set(data) - names
    if unknown:
        raise ValidationError(f"unknown keys in {where}: {sorted(unknown)}")
    coerced = dict(data)
    for key, value in coerced.items():
        if isinstance(value, list):
            coerced[key] = tuple(value)
    return cls(**coerced)


def load_checkpoint(path) -> TrainedStack:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ValidationError(f"unsupported checkpoint format version {version!r}")
    cfgs = doc["configs"]
    world_cfg = _dataclass_from(WorldConfig, cfgs["world"], "world config")
    arch = _dataclass_from(ArchConfig, cfgs["arch"], "arch config")
    train_cfg = _dataclass_from(TrainConfig, cfgs["train"], "train config")
    world = make_world(world_cfg)

    expected = init_params(arch, world, RngStream(0, "checkpoint-shape-probe"))
    params: dict[str, Tensor] = {}
    stored = doc["params"]
    missing = set(expected) - set(stored)
    extra = set(stored) - set(expected)
    if missing or extra:
        raise ValidationError(
            f"checkpoint parameters do not match config: missing {sorted(missing)}, "
            f"unexpected {sorted(extra)}")
    for name, spec in stored.items():
        shape = tuple(spec["shape"])
        if shape != expected[name].shape:
            raise ValidationError(
                f"parameter {name!r} has shape {shape}, config expects {expected[name].shape}")
        arr = np.asarray(spec["data"], dtype=np.float64).reshape(shape)
        params[name] = Tensor(arr, requires_grad=True)
    return TrainedStack(arch=arch, world=world, params=params,
                        train_config=train_cfg, metadata=doc.get("metadata", {}))
