"""Semantic identity projection: visual features -> context-space delta.

A reference feature is encoded into visual tokens, fused against the
context embedding by a single cross-attention block (context tokens as
queries, visual tokens as keys/values) plus an output linear map, and
the resulting delta is added residually:

    context' = context + alpha * delta

The injection never changes token count or width, and never mutates its
input; with alpha == 0 the output data is bit-identical to the input.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping

import numpy as np

from .errors import DimensionError, ValidationError
from .tensor import Tensor, matmul, reshape, scaled_dot_attention

if TYPE_CHECKING:  # pragma: no cover
    from .anchor import IdentityReference
    from .model import TrainedStack


@dataclass(frozen=True)
class VisualFeatures:
    """Visual tokens of a reference identity: (m_visual, d_visual)."""

    tokens: Tensor


@dataclass(frozen=True)
class ContextEmbedding:
    """Prompt-context tokens (n, d_model); provenance marks injection."""

    tokens: Tensor
    provenance: str = "base"


@dataclass(frozen=True)
class SemanticIdentityDelta:
    """Identity delta aligned with a context embedding: (n, d_model)."""

    tokens: Tensor


def visual_tokens_from_features(params: Mapping[str, Tensor], features: np.ndarray,
                                m_visual: int, d_visual: int) -> Tensor:
    """Batched toy visual encoder: (B, d) -> (B, m_visual, d_visual)."""
    f = np.asarray(features, dtype=np.float64)
    if f.ndim == 1:
        f = f[None, :]
    enc = params["sip.enc.w"]
    if f.shape[1] != enc.shape[0]:
        raise DimensionError(f"feature width {f.shape[1]} != encoder input {enc.shape[0]}")
    flat = matmul(Tensor(f, _internal=True), enc)
    return reshape(flat, (f.shape[0], m_visual, d_visual))


def extract_visual_features(ref: "IdentityReference", stack: "TrainedStack") -> VisualFeatures:
    """Deterministic visual tokens for a reference, via the trained encoder."""
    tokens = visual_tokens_from_features(
        stack.params, ref.feature, stack.arch.m_visual, stack.arch.d_visual)
    return VisualFeatures(tokens=Tensor(tokens.data[0], _internal=True))


def sip_delta(params: Mapping[str, Tensor], f_vis: Tensor, ctx: Tensor) -> Tensor:
    """Fuser core: cross-attention (ctx queries, visual keys/values) + linear."""
    q = matmul(ctx, params["sip.wq"])
    k = matmul(f_vis, params["sip.wk"])
    v = matmul(f_vis, params["sip.wv"])
    return matmul(scaled_dot_attention(q, k, v), params["sip.wo"])


def project(f: VisualFeatures, e: ContextEmbedding,
            params: Mapping[str, Tensor]) -> SemanticIdentityDelta:
    """Map visual tokens into the context space; output shape equals e."""
    delta = sip_delta(params, f.tokens, e.tokens)
    if delta.shape != e.tokens.shape:
        raise DimensionError(f"delta shape {delta.shape} != context shape {e.tokens.shape}")
    return SemanticIdentityDelta(tokens=delta)


def residual_inject(e: ContextEmbedding, delta: SemanticIdentityDelta,
                    alpha_final: float) -> ContextEmbedding:
    """context + alpha * delta, leaving the input untouched.

    alpha_final == 0.0 short-circuits to a bit-identical copy of the
    base tokens, so a disabled semantic stream is exactly a no-op.
    """
    if alpha_final < 0:
        raise ValidationError(f"alpha_final must be >= 0, got {alpha_final}")
    if delta.tokens.shape != e.tokens.shape:
        raise DimensionError(
            f"delta shape {delta.tokens.shape} != context shape {e.tokens.shape}")
    if alpha_final == 0.0:
        out = e.tokens.data.copy()
    else:
        out = e.tokens.data + alpha_final * delta.tokens.data
    return ContextEmbedding(tokens=Tensor(out, _internal=True), provenance="injected")
