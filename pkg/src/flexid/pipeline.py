"""Euler flow-matching sampler and the end-to-end generation pipeline.

Sampling integrates x' = -v from t_hat = 1 (pure noise) to 0 with a
fixed step 1/steps.  Each step runs a conditional pass (context with
the step's semantic injection, anchor at the step's visual weight) and
an unconditional pass (zero context, same anchor weighting), combined
by classifier-free guidance:

    v_hat = v_uncond + g * (v_cond - v_uncond)

A zero visual weight skips the anchor branch entirely, and a zero
semantic weight reuses the base context bit-for-bit, so switching a
stream off reproduces the plain backbone exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .anchor import IdentityReference, VisualIdentityEmbedding, build_identity_embedding
from .errors import ContractError, ValidationError
from .gating import GatingConfig, ScheduleSample, full_schedule, static_schedule
from .intent import EditDictionary, IntentResult, Prompt, detect_intent, normalize_prompt
from .model import TrainedStack, forward_velocity
from .projector import (ContextEmbedding, SemanticIdentityDelta, extract_visual_features,
                        project, residual_inject)
from .rng import RngStream
from .tensor import Tensor
from .world import attribute_from_prompt


@dataclass(frozen=True)
class LatentSample:
    x: np.ndarray
    t_hat: float


@dataclass(frozen=True)
class StepRecord:
    step: int
    t_hat: float
    alpha_final: float
    w_final: float
    v_uncond_norm: float
    v_cond_norm: float
    v_guided_norm: float


@dataclass
class GenerationTrace:
    final: LatentSample
    schedule: list[ScheduleSample]
    records: list[StepRecord]
    seed: int
    guidance: float
    intent: IntentResult | None = None
    attr_token: int = 0

    @property
    def final_x(self) -> np.ndarray:
        return self.final.x


def euler_sample(
    stack: TrainedStack,
    context: ContextEmbedding,
    anchor: VisualIdentityEmbedding | None,
    schedule: list[ScheduleSample],
    guidance: float,
    seed: int,
    delta: SemanticIdentityDelta | None = None,
    steps: int | None = None,
    intent: IntentResult | None = None,
    attr_token: int = 0,
    inject_anchor_in_uncond: bool = True,
) -> GenerationTrace:
    """Run the sampler over a resolved schedule; deterministic per seed."""
    if steps is not None and steps != len(schedule):
        raise ContractError(f"schedule has {len(schedule)} entries but steps={steps}")
    if len(schedule) < 1:
        raise ValidationError("schedule must contain at least one step")
    n = len(schedule)
    dt = 1.0 / n
    dx = stack.world.dim
    x = _initial_noise(seed, dx)

    anchor_t = None
    if anchor is not None:
        anchor_t = Tensor(anchor.tokens.data[None, :, :], _internal=True)
    null_ctx = Tensor(np.zeros((1,) + context.tokens.shape), _internal=True)

    records: list[StepRecord] = []
    for ss in schedule:
        if delta is not None:
            step_ctx = residual_inject(context, delta, ss.alpha_final)
        else:
            step_ctx = context
        cond_ctx = Tensor(step_ctx.tokens.data[None, :, :], _internal=True)
        t_arr = np.array([ss.t_hat])
        v_c = forward_velocity(stack.params, stack.arch, x[None, :], t_arr,
                               cond_ctx, anchor_t, ss.w_final).data[0, 0]
        uncond_anchor = anchor_t if inject_anchor_in_uncond else None
        v_u = forward_velocity(stack.params, stack.arch, x[None, :], t_arr,
                               null_ctx, uncond_anchor, ss.w_final).data[0, 0]
        if guidance == 1.0:
            v_hat = v_c
        else:
            v_hat = v_u + guidance * (v_c - v_u)
        records.append(StepRecord(
            step=ss.step, t_hat=ss.t_hat,
            alpha_final=ss.alpha_final, w_final=ss.w_final,
            v_uncond_norm=float(np.linalg.norm(v_u)),
            v_cond_norm=float(np.linalg.norm(v_c)),
            v_guided_norm=float(np.linalg.norm(v_hat)),
        ))
        x = x - dt * v_hat
    return GenerationTrace(
        final=LatentSample(x=x, t_hat=0.0),
        schedule=list(schedule),
        records=records,
        seed=seed,
        guidance=guidance,
        intent=intent,
        attr_token=attr_token,
    )


def _initial_noise(seed: int, dim: int) -> np.ndarray:
    """Initial latent at t_hat = 1: a seeded standard normal draw."""
    return RngStream(seed, "generation").child("noise").normal((dim,))


def flexid_generate(
    stack: TrainedStack,
    ref: IdentityReference,
    prompt: Prompt | str,
    gating: GatingConfig,
    dictionary: EditDictionary,
    seed: int,
    steps: int = 25,
    guidance: float = 4.0,
    sip_enabled: bool = True,
    cag_enabled: bool = True,
    inject_anchor_in_uncond: bool = True,
) -> GenerationTrace:
    """Full pipeline: intent -> schedule -> injection -> guided Euler run."""
    if isinstance(prompt, str):
        prompt = normalize_prompt(prompt)
    gating.validate()
    intent = detect_intent(prompt, dictionary)
    effective = gating if sip_enabled else replace(gating, alpha_base=0.0)
    if cag_enabled:
        schedule = full_schedule(effective, prompt, dictionary, steps)
    else:
        schedule = static_schedule(effective, steps, indicator=intent.indicator)

    attr_token = attribute_from_prompt(stack.world, prompt)
    context = ContextEmbedding(
        tokens=Tensor(stack.embed_context(stack.context_tokens(attr_token)).data,
                      _internal=True),
        provenance="base",
    )
    delta = None
    if sip_enabled:
        f_vis = extract_visual_features(ref, stack)
        delta = project(f_vis, context, stack.params)
    anchor = build_identity_embedding(ref, stack)
    return euler_sample(
        stack, context, anchor, schedule, guidance, seed,
        delta=delta, intent=intent, attr_token=attr_token,
        inject_anchor_in_uncond=inject_anchor_in_uncond,
    )
