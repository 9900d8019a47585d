"""Run configuration: one JSON document describing a full experiment.

Parsing is strict: unknown keys anywhere in the document are rejected
so typos fail loudly instead of silently falling back to defaults.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .checkpoint import canonical_json
from .errors import ValidationError
from .gating import GatingConfig
from .model import ArchConfig
from .training import TrainConfig
from .world import WorldConfig


@dataclass(frozen=True)
class RunConfig:
    world: WorldConfig = field(default_factory=WorldConfig)
    arch: ArchConfig = field(default_factory=ArchConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    gating: GatingConfig = field(default_factory=GatingConfig)
    prompt: str = "a photo of the subject smiling"
    reference: str = "held-out"
    seeds: tuple[int, ...] = tuple(range(64))
    sip_enabled: bool = True
    cag_enabled: bool = True
    steps: int = 25
    guidance: float = 4.0
    config_id: str = ""

    def validate(self) -> "RunConfig":
        self.world.validate()
        self.arch.validate()
        self.train.validate()
        self.gating.validate()
        if not self.seeds:
            raise ValidationError("seeds list must be non-empty")
        if self.steps < 1:
            raise ValidationError(f"steps must be >= 1, got {self.steps}")
        if self.guidance <= 0:
            raise ValidationError(f"guidance must be positive, got {self.guidance}")
        return self

    def semantic_dict(self) -> dict:
        d = asdict(self)
        d.pop("config_id")
        return d

    def config_hash(self) -> str:
        return hashlib.sha256(canonical_json(self.semantic_dict()).encode("utf-8")).hexdigest()

    def resolved_id(self) -> str:
        return self.config_id or self.config_hash()[:12]


def _strict(cls, data, where: str):
    if not isinstance(data, dict):
        raise ValidationError(f"{where} must be a JSON object, got {type(data).__name__}")
    names = {f.name for f in fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValidationError(f"unknown keys in {where}: {sorted(unknown)}")
    coerced = {}
    for key, value in data.items():
        if isinstance(value, list):
            value = tuple(value)
        coerced[key] = value
    return cls(**coerced)


def run_config_from_dict(data: dict, where: str = "run config") -> RunConfig:
    if not isinstance(data, dict):
        raise ValidationError(f"{where} must be a JSON object")
    nested = {
        "world": WorldConfig,
        "arch": ArchConfig,
        "train": TrainConfig,
        "gating": GatingConfig,
    }
    top = {f.name for f in fields(RunConfig)}
    unknown = set(data) - top
    if unknown:
        raise ValidationError(f"unknown keys in {where}: {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if key in nested:
            kwargs[key] = _strict(nested[key], value, f"{where}.{key}")
        elif isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    return RunConfig(**kwargs).validate()


def load_run_config(path) -> RunConfig:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return run_config_from_dict(data, where=str(path))


def load_sweep_grid(path) -> list[RunConfig]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        unknown = set(data) - {"configs"}
        if unknown:
            raise ValidationError(f"unknown keys in sweep grid: {sorted(unknown)}")
        data = data.get("configs", [])
    if not isinstance(data, list):
        raise ValidationError("sweep grid must be a list of run configs")
    return [run_config_from_dict(d, where=f"configs[{i}]") for i, d in enumerate(data)]
