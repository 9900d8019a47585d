"""Context-aware adaptive gating: per-step injection weights.

Two multiplicative factors shape each stream's weight.  Intent-driven
adjustment raises the semantic stream and lowers the visual stream when
the prompt carries edit intent:

    gamma_sem = 1 + lambda_up * indicator
    gamma_vis = 1 - lambda_down * indicator      (clamped at 0)

Temporal complementary scheduling hands the early, compositional part
of sampling to the semantic stream and the late, detail part to the
visual stream.  Time runs on t_hat in [0, 1] with 1 = pure noise:

    T_sem = t_hat        T_vis = 1 - t_hat

The resolved per-step weights are

    alpha_final = alpha_base * gamma_sem * T_sem
    w_final     = w_base     * gamma_vis * T_vis
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError
from .intent import EditDictionary, IntentResult, Prompt, detect_intent


@dataclass(frozen=True)
class GatingConfig:
    alpha_base: float = 0.1
    w_base: float = 1.0
    lambda_up: float = 0.5
    lambda_down: float = 0.5
    schedule_kind: str = "linear"
    clamp_gamma_vis: bool = True

    def validate(self) -> "GatingConfig":
        for name in ("alpha_base", "w_base", "lambda_up", "lambda_down"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise ValidationError(f"{name} must be finite and >= 0, got {value}")
        if self.schedule_kind != "linear":
            raise ValidationError(f"unsupported schedule_kind {self.schedule_kind!r}")
        return self


@dataclass(frozen=True)
class ScheduleSample:
    """Resolved weights for one sampling step.

    ``t_hat`` is the normalized time the step leaves from (1 = start of
    sampling).  For the linear CAG schedule T_sem + T_vis == 1 holds at
    every grid point; the static (gating-off) schedule sets both
    temporal weights to 1 instead.
    """
    step: int
    t_hat: float
    indicator: int
    gamma_sem: float
    gamma_vis: float
    T_sem: float
    T_vis: float
    alpha_final: float
    w_final: float


def adjustment_factors(indicator: int, lambda_up: float, lambda_down: float,
                       clamp: bool = True) -> tuple[float, float]:
    """Intent-driven stream adjustment (gamma_sem, gamma_vis)."""
    if indicator not in (0, 1):
        raise ValidationError(f"indicator must be 0 or 1, got {indicator!r}")
    if lambda_up < 0 or lambda_down < 0:
        raise ValidationError(f"adjustment rates must be >= 0, got {lambda_up}, {lambda_down}")
    gamma_sem = 1.0 + lambda_up * indicator
    gamma_vis = 1.0 - lambda_down * indicator
    if clamp and gamma_vis < 0.0:
        gamma_vis = 0.0
    return gamma_sem, gamma_vis


def temporal_weights(t_hat: float) -> tuple[float, float]:
    """Linear complementary schedule (T_sem, T_vis) = (t_hat, 1 - t_hat)."""
    if not (0.0 <= t_hat <= 1.0):
        raise ValidationError(f"t_hat must lie in [0, 1], got {t_hat}")
    return t_hat, 1.0 - t_hat


def weights_at(cfg: GatingConfig, t_hat: float, intent: IntentResult,
               step: int = 0) -> ScheduleSample:
    """Resolve the final injection weights at one time point."""
    cfg.validate()
    gamma_sem, gamma_vis = adjustment_factors(
        intent.indicator, cfg.lambda_up, cfg.lambda_down, clamp=cfg.clamp_gamma_vis)
    t_sem, t_vis = temporal_weights(t_hat)
    return ScheduleSample(
        step=step,
        t_hat=t_hat,
        indicator=intent.indicator,
        gamma_sem=gamma_sem,
        gamma_vis=gamma_vis,
        T_sem=t_sem,
        T_vis=t_vis,
        alpha_final=cfg.alpha_base * gamma_sem * t_sem,
        w_final=cfg.w_base * gamma_vis * t_vis,
    )


def full_schedule(cfg: GatingConfig, prompt: Prompt, dictionary: EditDictionary,
                  steps: int) -> list[ScheduleSample]:
    """One sample per Euler grid point t_hat = 1 - k/steps, k = 0..steps-1.

    Intent is detected once per prompt; each sample carries the weights
    used by the step that leaves its grid point.
    """
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    intent = detect_intent(prompt, dictionary)
    return [weights_at(cfg, 1.0 - k / steps, intent, step=k) for k in range(steps)]


def static_schedule(cfg: GatingConfig, steps: int, indicator: int = 0) -> list[ScheduleSample]:
    """Gating-off baseline: constant alpha_base / w_base at every step.

    Used when the adaptive controller is disabled; temporal and intent
    factors are pinned to 1 so the recorded weights still satisfy the
    product form.
    """
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    cfg.validate()
    return [
        ScheduleSample(
            step=k,
            t_hat=1.0 - k / steps,
            indicator=indicator,
            gamma_sem=1.0,
            gamma_vis=1.0,
            T_sem=1.0,
            T_vis=1.0,
            alpha_final=cfg.alpha_base,
            w_final=cfg.w_base,
        )
        for k in range(steps)
    ]
