"""Command-line interface.

Subcommands: train, generate, schedule, sweep, eval, dict-check.
Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import csvio
from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, load_run_config, load_sweep_grid
from .errors import FlexIDError
from .gating import GatingConfig, full_schedule
from .intent import default_dictionary_path, detect_intent, load_dictionary, normalize_prompt
from .metrics import attr_adherence, id_similarity
from .pipeline import flexid_generate
from .sweep import EvalReport, RunRecord, _aggregate, report_csv, resolve_reference, run_sweep
from .training import train
from .world import attribute_from_prompt, make_world


def _load_dict(path: str | None):
    return load_dictionary(path if path else default_dictionary_path())


def _gating_from_args(args) -> GatingConfig:
    return GatingConfig(
        alpha_base=args.alpha_base,
        w_base=args.w_base,
        lambda_up=args.lambda_up,
        lambda_down=args.lambda_down,
    )


def _add_gating_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha-base", type=float, default=0.1)
    p.add_argument("--w-base", type=float, default=1.0)
    p.add_argument("--lambda-up", type=float, default=0.5)
    p.add_argument("--lambda-down", type=float, default=0.5)


def cmd_train(args) -> int:
    cfg = load_run_config(args.config) if args.config else RunConfig()
    world = make_world(cfg.world)
    stack = train(world, cfg.arch, cfg.train, log_every=0 if args.quiet else 500)
    save_checkpoint(stack, args.out)
    meta = stack.metadata
    print(f"trained {cfg.train.steps} steps; "
          f"initial loss {csvio.fmt(meta['initial_loss'])}, "
          f"final loss {csvio.fmt(meta['final_loss'])}")
    print(f"checkpoint written to {args.out}")
    return 0


def cmd_generate(args) -> int:
    stack = load_checkpoint(args.ckpt)
    dictionary = _load_dict(args.dict)
    ref = resolve_reference(args.ref, stack)
    gating = _gating_from_args(args)
    trace = flexid_generate(
        stack, ref, args.prompt, gating, dictionary, args.seed,
        steps=args.steps, guidance=args.guidance,
        sip_enabled=not args.no_sip, cag_enabled=not args.no_cag)
    if args.trace:
        csvio.write_text(csvio.trace_csv(trace), args.trace)
    x = trace.final_x
    print("final sample:", " ".join(csvio.fmt(float(v)) for v in x))
    print(f"intent indicator: {trace.intent.indicator}")
    sim = id_similarity(x, ref.feature, stack.world)
    print(f"id_sim: {csvio.fmt(sim)}")
    if trace.attr_token > 0:
        offset = stack.world.offsets[trace.attr_token - 1]
        print(f"attr_adherence: {csvio.fmt(attr_adherence(x, ref.feature, offset))}")
    if args.trace:
        print(f"trace written to {args.trace}")
    return 0


def cmd_schedule(args) -> int:
    dictionary = _load_dict(args.dict)
    prompt = normalize_prompt(args.prompt)
    schedule = full_schedule(_gating_from_args(args), prompt, dictionary, args.steps)
    csvio.write_text(csvio.schedule_csv(schedule), args.out)
    print(f"schedule ({args.steps} steps) written to {args.out}")
    return 0


def cmd_sweep(args) -> int:
    configs = load_sweep_grid(args.grid)
    dictionary = _load_dict(args.dict)
    report = run_sweep(configs, cache_dir=args.cache, dictionary=dictionary,
                       log_every=0 if args.quiet else 1000)
    csvio.write_text(report_csv(report), args.out)
    print(f"report with {len(report.records)} runs written to {args.out}")
    return 0


def cmd_eval(args) -> int:
    stack = load_checkpoint(args.ckpt)
    dictionary = _load_dict(args.dict)
    ref = resolve_reference(args.ref, stack)
    gating = _gating_from_args(args)
    records = []
    prompt = normalize_prompt(args.prompt)
    attr = attribute_from_prompt(stack.world, prompt)
    for seed in range(args.seeds):
        trace = flexid_generate(
            stack, ref, prompt, gating, dictionary, seed,
            steps=args.steps, guidance=args.guidance,
            sip_enabled=not args.no_sip, cag_enabled=not args.no_cag)
        sim = id_similarity(trace.final_x, ref.feature, stack.world)
        adh = None
        if attr > 0:
            adh = attr_adherence(trace.final_x, ref.feature, stack.world.offsets[attr - 1])
        records.append(RunRecord("eval", args.prompt, seed, sim, adh))
    agg = _aggregate("eval", args.prompt, records)
    report = EvalReport(records=records, aggregates=[agg])
    if args.out:
        csvio.write_text(report_csv(report), args.out)
        print(f"report written to {args.out}")
    print(f"runs: {len(records)}")
    print(f"id_sim mean {csvio.fmt(agg.mean_id_sim)} std {csvio.fmt(agg.std_id_sim)}")
    if agg.mean_attr_adherence is not None:
        print(f"attr_adherence mean {csvio.fmt(agg.mean_attr_adherence)} "
              f"std {csvio.fmt(agg.std_attr_adherence)}")
    return 0


def cmd_dict_check(args) -> int:
    dictionary = _load_dict(args.dict)
    print(f"dictionary ok: {len(dictionary)} entries")
    for raw in args.prompt or []:
        prompt = normalize_prompt(raw)
        result = detect_intent(prompt, dictionary)
        print(f"intent {result.indicator}: {raw!r}")
        for m in result.matches:
            print(f"  {m.category}: {' '.join(m.tokens)!r} matches {m.phrase!r} at token {m.start}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexid")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="pretrain a stack and write a checkpoint")
    p.add_argument("--config", default=None, help="run config JSON (defaults used if omitted)")
    p.add_argument("--out", required=True)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("generate", help="one seeded generation from a checkpoint")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--ref", required=True, help="identity index, 'held-out', or 'seed:<n>'")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--steps", type=int, default=25)
    p.add_argument("--guidance", type=float, default=4.0)
    p.add_argument("--no-sip", action="store_true")
    p.add_argument("--no-cag", action="store_true")
    p.add_argument("--trace", default=None, help="write the per-step trace CSV here")
    p.add_argument("--dict", default=None)
    _add_gating_args(p)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("schedule", help="export the gating schedule for a prompt")
    p.add_argument("--prompt", required=True)
    p.add_argument("--dict", default=None)
    p.add_argument("--steps", type=int, default=25)
    p.add_argument("--out", required=True)
    _add_gating_args(p)
    p.set_defaults(fn=cmd_schedule)

    p = sub.add_parser("sweep", help="run a grid of configs and write a report CSV")
    p.add_argument("--grid", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--cache", default=None, help="directory for training checkpoints")
    p.add_argument("--dict", default=None)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("eval", help="score seeded generations for one setting")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--seeds", type=int, default=64)
    p.add_argument("--steps", type=int, default=25)
    p.add_argument("--guidance", type=float, default=4.0)
    p.add_argument("--no-sip", action="store_true")
    p.add_argument("--no-cag", action="store_true")
    p.add_argument("--out", default=None)
    p.add_argument("--dict", default=None)
    _add_gating_args(p)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("dict-check", help="validate a dictionary and probe prompts")
    p.add_argument("--dict", default=None)
    p.add_argument("--prompt", action="append", default=[])
    p.set_defaults(fn=cmd_dict_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FlexIDError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
