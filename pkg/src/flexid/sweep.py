"""Seeded experiment sweeps over run configurations.

Training is cached by a hash of (world, arch, train) config, so an
ablation grid that only toggles inference-time switches trains one
stack and reuses it.  Per-run failures are recorded in the report row
and the sweep continues.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .anchor import IdentityReference
from .checkpoint import load_checkpoint, save_checkpoint, train_key
from .config import RunConfig
from .csvio import REPORT_COLUMNS, _render
from .errors import FlexIDError, ValidationError
from .intent import EditDictionary, default_dictionary_path, load_dictionary, normalize_prompt
from .metrics import attr_adherence, id_similarity
from .model import TrainedStack
from .pipeline import flexid_generate
from .training import train
from .world import attribute_from_prompt


@dataclass(frozen=True)
class RunRecord:
    config_id: str
    prompt: str
    seed: int
    id_sim: float | None
    attr_adherence: float | None
    error: str | None = None


@dataclass(frozen=True)
class ConfigAggregate:
    config_id: str
    prompt: str
    mean_id_sim: float | None
    std_id_sim: float | None
    mean_attr_adherence: float | None
    std_attr_adherence: float | None


@dataclass
class EvalReport:
    records: list[RunRecord]
    aggregates: list[ConfigAggregate]


def resolve_reference(spec: str, stack: TrainedStack) -> IdentityReference:
    """Parse a reference spec: an index, "held-out", or "seed:<u64>"."""
    spec = spec.strip()
    if spec == "held-out":
        held = stack.train_config.resolve_held_out(stack.world.n_identities)
        if held is None:
            raise ValidationError("stack was trained without a held-out identity")
        return IdentityReference.from_index(held, stack.world)
    if spec.startswith("seed:"):
        return IdentityReference.from_seed(int(spec.split(":", 1)[1]), stack.world.dim)
    try:
        index = int(spec)
    except ValueError:
        raise ValidationError(f"reference must be an index, 'held-out' or 'seed:<n>', got {spec!r}")
    return IdentityReference.from_index(index, stack.world)


def obtain_stack(cfg: RunConfig, cache_dir=None, memo: dict | None = None,
                 log_every: int = 0) -> TrainedStack:
    """Train the stack for cfg, or reuse a cached one with the same key."""
    key = train_key(cfg.world, cfg.arch, cfg.train)
    if memo is not None and key in memo:
        return memo[key]
    stack = None
    cache_path = None
    if cache_dir is not None:
        cache_path = Path(cache_dir) / f"stack-{key[:16]}.json"
        if cache_path.exists():
            stack = load_checkpoint(cache_path)
    if stack is None:
        from .world import make_world

        stack = train(make_world(cfg.world), cfg.arch, cfg.train, log_every=log_every)
        if cache_path is not None:
            cache_path.parent.mkdir(parents=True, exist_ok=True)
            save_checkpoint(stack, cache_path)
    if memo is not None:
        memo[key] = stack
    return stack


def evaluate_generation(stack: TrainedStack, cfg: RunConfig, seed: int,
                        dictionary: EditDictionary) -> tuple[float, float | None]:
    """One seeded generation scored against its reference and prompt."""
    ref = resolve_reference(cfg.reference, stack)
    trace = flexid_generate(
        stack, ref, cfg.prompt, cfg.gating, dictionary, seed,
        steps=cfg.steps, guidance=cfg.guidance,
        sip_enabled=cfg.sip_enabled, cag_enabled=cfg.cag_enabled)
    sim = id_similarity(trace.final_x, ref.feature, stack.world)
    adherence = None
    if trace.attr_token > 0:
        offset = stack.world.offsets[trace.attr_token - 1]
        adherence = attr_adherence(trace.final_x, ref.feature, offset)
    return sim, adherence


def run_sweep(configs: list[RunConfig], cache_dir=None,
              dictionary: EditDictionary | None = None,
              log_every: int = 0) -> EvalReport:
    """Run every (config, seed) cell; failures become tagged rows."""
    for cfg in configs:
        cfg.validate()
    if dictionary is None:
        dictionary = load_dictionary(default_dictionary_path())
    memo: dict = {}
    records: list[RunRecord] = []
    aggregates: list[ConfigAggregate] = []
    for cfg in configs:
        cid = cfg.resolved_id()
        cfg_records: list[RunRecord] = []
        stack = None
        stack_error: str | None = None
        try:
            stack = obtain_stack(cfg, cache_dir=cache_dir, memo=memo, log_every=log_every)
        except FlexIDError as exc:
            stack_error = f"{type(exc).__name__}: {exc}"
        for seed in cfg.seeds:
            if stack_error is not None:
                cfg_records.append(RunRecord(cid, cfg.prompt, seed, None, None, stack_error))
                continue
            try:
                sim, adherence = evaluate_generation(stack, cfg, seed, dictionary)
                cfg_records.append(RunRecord(cid, cfg.prompt, seed, sim, adherence))
            except FlexIDError as exc:
                cfg_records.append(RunRecord(cid, cfg.prompt, seed, None, None,
                                             f"{type(exc).__name__}: {exc}"))
        records.extend(cfg_records)
        aggregates.append(_aggregate(cid, cfg.prompt, cfg_records))
    records.sort(key=lambda r: (r.config_id, r.seed))
    return EvalReport(records=records, aggregates=aggregates)


def _aggregate(cid: str, prompt: str, rows: list[RunRecord]) -> ConfigAggregate:
    sims = [r.id_sim for r in rows if r.error is None and r.id_sim is not None]
    adhs = [r.attr_adherence for r in rows if r.error is None and r.attr_adherence is not None]

    def mean_std(values):
        if not values:
            return None, None
        arr = np.asarray(values, dtype=np.float64)
        return float(arr.mean()), float(arr.std())

    mean_sim, std_sim = mean_std(sims)
    mean_adh, std_adh = mean_std(adhs)
    return ConfigAggregate(cid, prompt, mean_sim, std_sim, mean_adh, std_adh)


def report_csv(report: EvalReport) -> str:
    def rows():
        for r in report.records:
            yield ("run", r.config_id, r.prompt, r.seed, r.id_sim, r.attr_adherence, r.error)
        for a in report.aggregates:
            yield ("mean", a.config_id, a.prompt, None, a.mean_id_sim,
                   a.mean_attr_adherence, None)
            yield ("std", a.config_id, a.prompt, None, a.std_id_sim,
                   a.std_attr_adherence, None)

    return _render(rows(), REPORT_COLUMNS)
