"""Flow-matching pretraining of the backbone plus both adapter streams.

Each sample draws t ~ U(0,1), interpolates x_t = (1-t) x0 + t eps and
regresses the velocity eps - x0 with a plain mean squared error.

Conditioning is modal, mirroring how reference-image adapters are fit:
with probability ``p_caption`` a sample is caption-mode (anchor branch
off, context names the true attribute), otherwise it is anchor-mode
(anchor branch at full training weight, context carries no attribute
and the reference must explain the whole appearance).  Independently,
``p_uncond`` of samples have their context zeroed for classifier-free
guidance.  The reference feature of a sample is its clean appearance:
identity center plus the realized attribute offset.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TrainingDivergedError, ValidationError
from .model import (ArchConfig, NULL_ATTR_TOKEN, TrainedStack, batched_identity_embedding,
                    forward_velocity, init_params, subject_token)
from .optim import AdamState, adam_step
from .projector import sip_delta, visual_tokens_from_features
from .rng import RngStream
from .tensor import Tape, Tensor, add, backward, gather_rows, mean_all, mul, scale, sub
from .world import SyntheticWorld, sample_dataset


@dataclass(frozen=True)
class TrainConfig:
    steps: int = 5000
    batch_size: int = 32
    lr: float = 3e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    p_uncond: float = 0.1
    p_caption: float = 0.5
    p_claim_noise: float = 0.0
    p_anchor_true_caption: float = 0.2
    p_anchor_conflict_caption: float = 0.5
    ref_augment_sigma: float = 1.0
    alpha_train: float = 0.1
    w_train: float = 1.0
    w_train_min: float = 1.0
    held_out_identity: int | None = -1
    seed: int = 42

    def validate(self) -> "TrainConfig":
        if self.steps < 0:
            raise ValidationError(f"steps must be >= 0, got {self.steps}")
        if self.batch_size < 1:
            raise ValidationError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ValidationError(f"lr must be positive, got {self.lr}")
        for name in ("p_uncond", "p_caption", "p_claim_noise",
                     "p_anchor_true_caption", "p_anchor_conflict_caption"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} must lie in [0, 1], got {v}")
        if self.p_anchor_true_caption + self.p_anchor_conflict_caption > 1.0:
            raise ValidationError("anchor caption mode probabilities exceed 1")
        if self.ref_augment_sigma < 0:
            raise ValidationError("ref_augment_sigma must be >= 0")
        if self.alpha_train < 0 or self.w_train < 0:
            raise ValidationError("training injection weights must be >= 0")
        if not (0.0 <= self.w_train_min <= self.w_train):
            raise ValidationError("w_train_min must lie in [0, w_train]")
        return self

    def resolve_held_out(self, n_identities: int) -> int | None:
        if self.held_out_identity is None:
            return None
        idx = self.held_out_identity
        if idx < 0:
            idx += n_identities
        if not (0 <= idx < n_identities):
            raise ValidationError(
                f"held_out_identity {self.held_out_identity} out of range for "
                f"{n_identities} identities")
        return idx


def training_identity_pool(world: SyntheticWorld, cfg: TrainConfig) -> list[int]:
    held_out = cfg.resolve_held_out(world.n_identities)
    pool = [i for i in range(world.n_identities) if i != held_out]
    if not pool:
        raise ValidationError("training identity pool is empty; disable held_out_identity")
    return pool


def train(world: SyntheticWorld, arch: ArchConfig, cfg: TrainConfig,
          rng: RngStream | None = None, log_every: int = 0) -> TrainedStack:
    """Fit a stack on the world; fully deterministic given (configs, seed)."""
    arch.validate()
    cfg.validate()
    if rng is None:
        rng = RngStream(cfg.seed, "train")
    params = init_params(arch, world, rng.child("init"))
    pool = training_identity_pool(world, cfg)

    metadata = {
        "seed": cfg.seed,
        "steps": cfg.steps,
        "held_out_identity": cfg.resolve_held_out(world.n_identities),
        "initial_loss": None,
        "final_loss": None,
    }
    stack = TrainedStack(arch=arch, world=world, params=params,
                         train_config=cfg, metadata=metadata)
    if cfg.steps == 0:
        return stack

    data_rng = rng.child("data")
    noise_rng = rng.child("noise")
    time_rng = rng.child("time")
    drop_rng = rng.child("dropout")
    adam = AdamState(params)
    subject = subject_token(world.n_attributes)
    dx = world.dim
    losses: list[float] = []

    for step in range(cfg.steps):
        x0, ident, attr_tok = sample_dataset(world, cfg.batch_size, data_rng, identities=pool)
        b = x0.shape[0]
        # Reference augmentation: jitter each sample's identity into a
        # virtual one, shifting reference and target together.  This is
        # the stand-in for the identity diversity real adapter training
        # gets from large crop datasets; without it the anchor pathways
        # memorize the few training identities instead of passing the
        # reference through, and held-out anchoring fails.
        aug = cfg.ref_augment_sigma * data_rng.normal((b, dx))
        x0 = x0 + aug
        eps = noise_rng.normal((b, dx))
        t = time_rng.uniform((b,))
        x_t = (1.0 - t)[:, None] * x0 + t[:, None] * eps
        v_target = eps - x0

        caption = drop_rng.uniform((b,)) < cfg.p_caption
        ctx_drop = drop_rng.uniform((b,)) < cfg.p_uncond
        noisy_claim = drop_rng.uniform((b,)) < cfg.p_claim_noise
        noise_attr = drop_rng.integers(1, world.n_attributes + 1, (b,))
        anchor_caption_mode = drop_rng.uniform((b,))
        conflict_attr = drop_rng.integers(0, world.n_attributes + 1, (b,))
        w_jitter = drop_rng.uniform((b,))

        # The anchor reference is the state-matched crop (identity plus the
        # realized attribute): the anchor branch trains as an appearance
        # copier.  The semantic stream sees the neutral identity crop, so
        # attribute presence stays explainable only by the caption token.
        identity_features = world.centers[ident] + aug
        anchor_features = identity_features.copy()
        present = attr_tok > 0
        if present.any():
            anchor_features[present] += world.offsets[attr_tok[present] - 1]

        # Caption rows name their attribute; a fraction of neutral rows
        # carry a mismatched claim, softening the learned claim strength.
        ctx_attr = np.where(caption, attr_tok, NULL_ATTR_TOKEN)
        mismatch = caption & (attr_tok == 0) & noisy_claim
        ctx_attr = np.where(mismatch, noise_attr, ctx_attr)
        # Anchor rows see the caption distribution of real crop datasets:
        # sometimes true, often unrelated to the crop's state.  The target
        # always follows the reference, so the model learns to trust the
        # anchor over the caption whenever the anchor branch is active.
        anchor_rows = ~caption
        anchor_true = anchor_rows & (anchor_caption_mode < cfg.p_anchor_true_caption)
        anchor_conflict = anchor_rows & ~anchor_true & (
            anchor_caption_mode < cfg.p_anchor_true_caption + cfg.p_anchor_conflict_caption)
        ctx_attr = np.where(anchor_true, attr_tok, ctx_attr)
        ctx_attr = np.where(anchor_conflict, conflict_attr, ctx_attr)
        ctx_ids = np.stack([np.full(b, subject), ctx_attr], axis=1)

        with Tape() as tape:
            anchor_emb = batched_identity_embedding(params, arch, anchor_features, dx)
            f_vis = visual_tokens_from_features(params, identity_features,
                                                arch.m_visual, arch.d_visual)
            base_ctx = gather_rows(params["embed.table"], ctx_ids)
            # Semantic injection only on truthfully-captioned rows: anchor-mode
            # rows must explain the appearance through the anchor branch alone,
            # and mismatched claims must not be blamed on the semantic stream.
            sip_mask = Tensor((caption & ~mismatch).astype(np.float64)[:, None, None],
                              _internal=True)
            delta = mul(sip_delta(params, f_vis, base_ctx), sip_mask)
            injected = add(base_ctx, scale(delta, cfg.alpha_train))
            keep = Tensor((~ctx_drop).astype(np.float64)[:, None, None], _internal=True)
            ctx = mul(injected, keep)
            # Anchor rows train across a band of injection weights so the
            # scheduler's intermediate weights stay in-distribution.
            w_rows = cfg.w_train_min + (cfg.w_train - cfg.w_train_min) * w_jitter
            wvec = Tensor(np.where(caption, 0.0, w_rows)[:, None, None], _internal=True)
            v = forward_velocity(params, arch, x_t, t, ctx, anchor_emb, wvec)
            diff = sub(v, Tensor(v_target[:, None, :], _internal=True))
            loss = mean_all(mul(diff, diff))
        loss_value = loss.item()
        if not np.isfinite(loss_value):
            raise TrainingDivergedError(step)
        by_leaf = backward(tape, loss)
        grads = {name: by_leaf[p] for name, p in params.items() if p in by_leaf}
        adam_step(params, grads, adam, cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
        losses.append(loss_value)
        if log_every and (step % log_every == 0 or step == cfg.steps - 1):
            print(f"step {step:6d}  loss {loss_value:.6f}")

    tail = max(1, cfg.steps // 10)
    metadata["initial_loss"] = losses[0]
    metadata["final_loss"] = float(np.mean(losses[-tail:]))
    return stack
