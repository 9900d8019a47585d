"""Run the ablation grid on the default world and print the trade-off table.

Used to pick default world/training settings and to freeze the margins
enforced by the acceptance suite.  Configs share one trained stack
(gating and the semantic stream are inference-time switches).

Usage: python scripts/calibrate_pareto.py [--steps 5000] [--seeds 64]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

import flexid as fx


def evaluate(stack, ref, prompt, dictionary, seeds, *, sip, cag, w_base, steps, guidance):
    gating = fx.GatingConfig(w_base=w_base)
    sims, adhs, dists = [], [], []
    for seed in seeds:
        trace = fx.flexid_generate(stack, ref, prompt, gating, dictionary, seed,
                                   steps=steps, guidance=guidance,
                                   sip_enabled=sip, cag_enabled=cag)
        x = trace.final_x
        sims.append(fx.id_similarity(x, ref.feature, stack.world))
        dists.append(float(np.linalg.norm(x - ref.feature)))
        if trace.attr_token > 0:
            off = stack.world.offsets[trace.attr_token - 1]
            adhs.append(fx.attr_adherence(x, ref.feature, off))
    return (float(np.mean(sims)), float(np.mean(adhs)) if adhs else float("nan"),
            float(np.mean(dists)))


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--seeds", type=int, default=64)
    ap.add_argument("--world-seed", type=int, default=None)
    ap.add_argument("--train-seed", type=int, default=None)
    ap.add_argument("--prompt", default="a photo of the subject smiling")
    args = ap.parse_args()

    world_cfg = fx.WorldConfig()
    if args.world_seed is not None:
        world_cfg = fx.WorldConfig(seed=args.world_seed)
    train_cfg = fx.TrainConfig(steps=args.steps)
    if args.train_seed is not None:
        train_cfg = fx.TrainConfig(steps=args.steps, seed=args.train_seed)

    world = fx.make_world(world_cfg)
    print(f"world: K={world.n_identities} d={world.dim} "
          f"min center dist {world.min_center_distance():.3f}")
    t0 = time.time()
    stack = fx.train(world, fx.ArchConfig(), train_cfg, log_every=1000)
    print(f"trained in {time.time() - t0:.1f}s  "
          f"loss {stack.metadata['initial_loss']:.4f} -> {stack.metadata['final_loss']:.4f}")

    held = stack.train_config.resolve_held_out(world.n_identities)
    ref = fx.IdentityReference.from_index(held, world)
    dictionary = fx.load_dictionary(fx.default_dictionary_path())
    seeds = range(args.seeds)

    rows = [
        ("rigid (cag off, sip off)", dict(sip=False, cag=False, w_base=1.0)),
        ("sip only (cag off)", dict(sip=True, cag=False, w_base=1.0)),
        ("cag only (sip off)", dict(sip=False, cag=True, w_base=1.0)),
        ("flexid (cag+sip)", dict(sip=True, cag=True, w_base=1.0)),
        ("no anchor (w=0)", dict(sip=True, cag=True, w_base=0.0)),
        ("half anchor (w=0.5)", dict(sip=True, cag=True, w_base=0.5)),
    ]
    results = {}
    print(f"\n{'config':28s} {'id_sim':>8s} {'adherence':>10s} {'dist':>7s}")
    for name, kw in rows:
        sim, adh, dist = evaluate(stack, ref, args.prompt, dictionary, seeds,
                                  steps=25, guidance=4.0, **kw)
        results[name] = (sim, adh, dist)
        print(f"{name:28s} {sim:8.4f} {adh:10.4f} {dist:7.3f}")

    rigid = results["rigid (cag off, sip off)"]
    flex = results["flexid (cag+sip)"]
    noanchor = results["no anchor (w=0)"]
    print("\nacceptance margins:")
    print(f"  (i)   rigid id_sim highest: {rigid[0]:.4f} vs flexid {flex[0]:.4f} "
          f"vs no-anchor {noanchor[0]:.4f}")
    print(f"  (ii)  flexid adherence - rigid adherence = {flex[1] - rigid[1]:+.4f} (need >= +0.10)")
    print(f"  (iii) flexid id_sim - rigid id_sim = {flex[0] - rigid[0]:+.4f} (need >= -0.10)")
    print(f"  (iv)  flexid id_sim - no-anchor id_sim = {flex[0] - noanchor[0]:+.4f} (need >= +0.15)")
    w_order = [results["no anchor (w=0)"][2], results["half anchor (w=0.5)"][2],
               results["flexid (cag+sip)"][2]]
    print(f"  (A4)  mean dist vs w_base 0/0.5/1.0: "
          f"{w_order[0]:.3f} >= {w_order[1]:.3f} >= {w_order[2]:.3f} ? "
          f"{w_order[0] >= w_order[1] >= w_order[2]}")


if __name__ == "__main__":
    main()
