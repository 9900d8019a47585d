"""Toy conditional velocity backbone.

The latent vector and a sinusoidal time encoding become a two-token
sequence that passes through pre-norm transformer blocks: self-attention,
cross-attention against the prompt context (with the anchor branch
hooked in), and a GELU feed-forward.  The velocity is read from the
latent token after a final layernorm.

Context token layout: [SUBJECT, attribute], where attribute token 0 is
the "no attribute" slot and tokens 1..A name world attributes.  The
embedding table therefore has A + 2 rows (SUBJECT is the last row).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Optional, Union

import numpy as np

from .anchor import (AnchorLayerParams, AnchorProjection, decoupled_cross_attention,
                     identity_embedding_from_features, local_slices)
from .errors import ConfigError, ValidationError
from .rng import RngStream
from .tensor import Tensor, add, concat, gather_rows, gelu, layernorm, matmul, slice_axis
from .world import SyntheticWorld

if TYPE_CHECKING:  # pragma: no cover
    from .training import TrainConfig


@dataclass(frozen=True)
class ArchConfig:
    d_model: int = 32
    n_blocks: int = 2
    n_heads: int = 2
    d_ff: int = 64
    m_local: int = 3
    m_visual: int = 4
    d_visual: int = 16
    d_time: int = 8
    ln_eps: float = 1e-5
    injected_layers: tuple[bool, ...] | None = None

    def validate(self) -> "ArchConfig":
        if self.d_model % self.n_heads != 0:
            raise ConfigError(f"d_model {self.d_model} not divisible by {self.n_heads} heads")
        if self.d_time % 2 != 0:
            raise ConfigError("d_time must be even")
        if min(self.d_model, self.n_blocks, self.n_heads, self.d_ff, self.m_local,
               self.m_visual, self.d_visual) < 1:
            raise ConfigError("architecture sizes must be positive")
        if self.injected_layers is not None and len(self.injected_layers) != self.n_blocks:
            raise ConfigError(
                f"injected_layers needs {self.n_blocks} flags, got {len(self.injected_layers)}")
        return self

    def is_injected(self, block: int) -> bool:
        if self.injected_layers is None:
            return True
        return bool(self.injected_layers[block])


NULL_ATTR_TOKEN = 0


def subject_token(n_attributes: int) -> int:
    return n_attributes + 1


def vocab_size(n_attributes: int) -> int:
    return n_attributes + 2


def time_features(t: np.ndarray, d_time: int) -> np.ndarray:
    """Sinusoidal features of normalized time, frequencies 1, 2, 4, ..."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    freqs = 2.0 ** np.arange(d_time // 2)
    ang = 2.0 * np.pi * t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=-1)


def init_params(arch: ArchConfig, world: SyntheticWorld, rng: RngStream) -> dict[str, Tensor]:
    """Fresh trainable parameters; matrices use 1/sqrt(fan_in) init."""
    arch.validate()
    d = arch.d_model
    dx = world.dim

    def mat(r: RngStream, fan_in: int, shape) -> Tensor:
        return Tensor(r.normal(shape) / np.sqrt(fan_in), requires_grad=True)

    def zeros(shape) -> Tensor:
        return Tensor(np.zeros(shape), requires_grad=True)

    def ones(shape) -> Tensor:
        return Tensor(np.ones(shape), requires_grad=True)

    p: dict[str, Tensor] = {}
    r = rng.child("params")
    p["embed.table"] = Tensor(r.child("embed").normal((vocab_size(world.n_attributes), d)),
                              requires_grad=True)
    p["in.w"] = mat(r.child("in"), dx, (dx, d))
    p["in.b"] = zeros((d,))
    p["time.w"] = mat(r.child("time"), arch.d_time, (arch.d_time, d))
    p["time.b"] = zeros((d,))
    for i in range(arch.n_blocks):
        b = f"blk{i}."
        rb = r.child(f"block{i}")
        for ln in ("ln1", "ln2", "ln3"):
            p[b + ln + ".g"] = ones((d,))
            p[b + ln + ".b"] = zeros((d,))
        for name in ("self.wq", "self.wk", "self.wv", "self.wo",
                     "cross.wq", "cross.wk", "cross.wv", "cross.wo",
                     "anchor.wk", "anchor.wv"):
            p[b + name] = mat(rb.child(name), d, (d, d))
        p[b + "ffn.w1"] = mat(rb.child("ffn.w1"), d, (d, arch.d_ff))
        p[b + "ffn.b1"] = zeros((arch.d_ff,))
        p[b + "ffn.w2"] = mat(rb.child("ffn.w2"), arch.d_ff, (arch.d_ff, d))
        p[b + "ffn.b2"] = zeros((d,))
    p["final_ln.g"] = ones((d,))
    p["final_ln.b"] = zeros((d,))
    p["out.w"] = mat(r.child("out"), d, (d, dx))
    p["out.b"] = zeros((dx,))

    p["sip.enc.w"] = mat(r.child("sip.enc"), dx, (dx, arch.m_visual * arch.d_visual))
    p["sip.wq"] = mat(r.child("sip.wq"), d, (d, d))
    p["sip.wk"] = mat(r.child("sip.wk"), arch.d_visual, (arch.d_visual, d))
    p["sip.wv"] = mat(r.child("sip.wv"), arch.d_visual, (arch.d_visual, d))
    p["sip.wo"] = mat(r.child("sip.wo"), d, (d, d))

    p["vfa.global.w"] = mat(r.child("vfa.global"), dx, (dx, d))
    for j, sl in enumerate(local_slices(dx, arch.m_local)):
        width = sl.stop - sl.start
        p[f"vfa.local{j}.w"] = mat(r.child(f"vfa.local{j}"), width, (width, d))
    return p


@dataclass
class TrainedStack:
    """Backbone plus adapter parameters and the world they were fit on."""

    arch: ArchConfig
    world: SyntheticWorld
    params: dict[str, Tensor]
    train_config: "TrainConfig"
    metadata: dict = field(default_factory=dict)

    def anchor_layer(self, block: int) -> AnchorLayerParams:
        return AnchorLayerParams(
            index=block,
            wk=self.params[f"blk{block}.anchor.wk"],
            wv=self.params[f"blk{block}.anchor.wv"],
            injected=self.arch.is_injected(block),
        )

    def context_tokens(self, attr_token: int) -> np.ndarray:
        """Token ids for a prompt context with one attribute slot."""
        if not (0 <= attr_token <= self.world.n_attributes):
            raise ValidationError(
                f"attribute token {attr_token} out of range 0..{self.world.n_attributes}")
        return np.array([subject_token(self.world.n_attributes), attr_token])

    def embed_context(self, token_ids: np.ndarray) -> Tensor:
        return gather_rows(self.params["embed.table"], np.asarray(token_ids))


def forward_velocity(
    params: dict[str, Tensor],
    arch: ArchConfig,
    x: np.ndarray,
    t: np.ndarray,
    ctx: Tensor,
    anchor_emb: Optional[Tensor],
    w: Union[float, Tensor],
) -> Tensor:
    """Predict velocity for a batch: (B, dx) x (B,) x (B, n, d) -> (B, 1, dx).

    ``ctx`` already carries any semantic injection.  ``anchor_emb`` is a
    batched identity embedding or None; ``w`` weights the anchor branch
    and may be a per-sample (B, 1, 1) tensor during training.
    """
    x = np.asarray(x, dtype=np.float64)
    squeeze_t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    x_tok = add(matmul(Tensor(x[:, None, :], _internal=True), params["in.w"]), params["in.b"])
    tf = Tensor(time_features(squeeze_t, arch.d_time)[:, None, :], _internal=True)
    t_tok = add(matmul(tf, params["time.w"]), params["time.b"])
    h = concat([x_tok, t_tok], axis=-2)
    for i in range(arch.n_blocks):
        b = f"blk{i}."
        a = layernorm(h, params[b + "ln1.g"], params[b + "ln1.b"], arch.ln_eps)
        attn = decoupled_cross_attention(
            matmul(a, params[b + "self.wq"]),
            matmul(a, params[b + "self.wk"]),
            matmul(a, params[b + "self.wv"]),
            None, 0.0, arch.n_heads)
        h = add(h, matmul(attn, params[b + "self.wo"]))

        a = layernorm(h, params[b + "ln2.g"], params[b + "ln2.b"], arch.ln_eps)
        anchor = None
        use_anchor = (anchor_emb is not None and arch.is_injected(i)
                      and not (isinstance(w, float) and w == 0.0))
        if use_anchor:
            anchor = AnchorProjection(
                k_id=matmul(anchor_emb, params[b + "anchor.wk"]),
                v_id=matmul(anchor_emb, params[b + "anchor.wv"]))
        attn = decoupled_cross_attention(
            matmul(a, params[b + "cross.wq"]),
            matmul(ctx, params[b + "cross.wk"]),
            matmul(ctx, params[b + "cross.wv"]),
            anchor, w, arch.n_heads)
        h = add(h, matmul(attn, params[b + "cross.wo"]))

        a = layernorm(h, params[b + "ln3.g"], params[b + "ln3.b"], arch.ln_eps)
        hidden = gelu(add(matmul(a, params[b + "ffn.w1"]), params[b + "ffn.b1"]))
        h = add(h, add(matmul(hidden, params[b + "ffn.w2"]), params[b + "ffn.b2"]))
    hf = layernorm(h, params["final_ln.g"], params["final_ln.b"], arch.ln_eps)
    latent = slice_axis(hf, -2, 0, 1)
    return add(matmul(latent, params["out.w"]), params["out.b"])


def batched_identity_embedding(params: dict[str, Tensor], arch: ArchConfig,
                               features: np.ndarray, dim: int) -> Tensor:
    return identity_embedding_from_features(params, features, dim, arch.m_local)
