"""Visual feature anchoring: dual-granularity identity embedding and
weighted decoupled cross-attention.

The identity embedding concatenates one global token (a trained map of
the whole reference feature) with ``m_local`` local tokens (trained maps
of contiguous feature sub-slices).  Inside an injected attention layer
the embedding is projected to dedicated key/value pairs and added as a
second, separately-normalized attention branch:

    out = Softmax(Q Kᵀ/sqrt(d)) V + w * Softmax(Q K_idᵀ/sqrt(d)) V_id

The two branches share no softmax, so the base attention probabilities
are untouched by the anchor, and the output is affine in w.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional, Union

import numpy as np

from .errors import ContractError, DimensionError, IdentityLookupError, ValidationError
from .rng import RngStream
from .tensor import Tensor, concat, matmul, scale, scaled_dot_attention, slice_axis

if TYPE_CHECKING:  # pragma: no cover
    from .model import TrainedStack
    from .world import SyntheticWorld


@dataclass(frozen=True)
class IdentityReference:
    """A reference subject: an identity index of the world, or a raw
    feature vector standing in for a held-out face crop."""

    feature: np.ndarray
    index: int | None = None

    @staticmethod
    def from_index(index: int, world: "SyntheticWorld") -> "IdentityReference":
        if not (0 <= index < world.n_identities):
            raise IdentityLookupError(
                f"identity index {index} not in world with {world.n_identities} identities")
        return IdentityReference(feature=world.centers[index].copy(), index=index)

    @staticmethod
    def from_seed(seed: int, dim: int) -> "IdentityReference":
        feature = RngStream(seed, "held-out-reference").normal((dim,))
        return IdentityReference(feature=feature, index=None)

    @staticmethod
    def from_feature(feature: np.ndarray) -> "IdentityReference":
        arr = np.asarray(feature, dtype=np.float64)
        if arr.ndim != 1 or not np.all(np.isfinite(arr)):
            raise ValidationError("reference feature must be a finite 1-d vector")
        return IdentityReference(feature=arr, index=None)


@dataclass(frozen=True)
class VisualIdentityEmbedding:
    """(1 + m_local) identity tokens; the first is the global token."""

    tokens: Tensor


@dataclass(frozen=True)
class AnchorProjection:
    """Per-layer anchor keys/values, full width; heads are sliced at use."""

    k_id: Tensor
    v_id: Tensor


@dataclass(frozen=True)
class AnchorLayerParams:
    index: int
    wk: Tensor
    wv: Tensor
    injected: bool


def local_slices(dim: int, m_local: int) -> list[slice]:
    """Contiguous near-equal feature sub-slices for the local pathway."""
    if m_local < 1 or m_local > dim:
        raise ValidationError(f"m_local must be in [1, {dim}], got {m_local}")
    bounds = np.linspace(0, dim, m_local + 1).astype(int)
    return [slice(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]


def identity_embedding_from_features(params: dict, features: np.ndarray,
                                     dim: int, m_local: int) -> Tensor:
    """Batched dual-granularity embedding: (B, d) -> (B, 1+m_local, d_model)."""
    f = np.asarray(features, dtype=np.float64)
    squeeze = f.ndim == 1
    if squeeze:
        f = f[None, :]
    if f.shape[1] != dim:
        raise DimensionError(f"feature width {f.shape[1]} != world dim {dim}")
    tokens = [matmul(Tensor(f[:, None, :], _internal=True), params["vfa.global.w"])]
    for j, sl in enumerate(local_slices(dim, m_local)):
        piece = Tensor(f[:, sl][:, None, :], _internal=True)
        tokens.append(matmul(piece, params[f"vfa.local{j}.w"]))
    return concat(tokens, axis=-2)  # (B, 1+m_local, d_model)


def build_identity_embedding(ref: IdentityReference, stack: "TrainedStack") -> VisualIdentityEmbedding:
    """Embed one reference through the stack's trained anchor pathways."""
    emb = identity_embedding_from_features(
        stack.params, ref.feature, stack.world.dim, stack.arch.m_local)
    return VisualIdentityEmbedding(tokens=Tensor(emb.data[0], _internal=True))


def anchor_projection(v: VisualIdentityEmbedding, layer: AnchorLayerParams) -> AnchorProjection:
    """Project identity tokens to this layer's dedicated keys/values."""
    if not layer.injected:
        raise ContractError(f"layer {layer.index} is not flagged for anchor injection")
    return AnchorProjection(k_id=matmul(v.tokens, layer.wk), v_id=matmul(v.tokens, layer.wv))


def _split_heads(x: Tensor, n_heads: int) -> list[Tensor]:
    d = x.shape[-1]
    if d % n_heads != 0:
        raise DimensionError(f"width {d} not divisible by {n_heads} heads")
    dh = d // n_heads
    return [slice_axis(x, -1, h * dh, (h + 1) * dh) for h in range(n_heads)]


def decoupled_cross_attention(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    anchor: Optional[AnchorProjection],
    w_final: Union[float, Tensor],
    n_heads: int = 1,
) -> Tensor:
    """Base attention plus w times an anchor-keyed attention branch.

    When ``anchor`` is None or ``w_final`` is exactly 0.0 the anchor
    branch is skipped entirely, so the result is bit-identical to plain
    attention.  ``w_final`` may be a per-sample tensor broadcastable
    against the branch output (used for batched training).
    """
    if q.shape[-1] != k.shape[-1]:
        raise DimensionError(f"query/key widths disagree: {q.shape} vs {k.shape}")
    skip = anchor is None or (isinstance(w_final, float) and w_final == 0.0)
    if not skip and anchor.k_id.shape[-1] != q.shape[-1]:
        raise DimensionError(
            f"anchor width {anchor.k_id.shape[-1]} != query width {q.shape[-1]}")
    heads_out = []
    if n_heads == 1:
        qs, ks, vs = [q], [k], [v]
        aks = avs = None
        if not skip:
            aks, avs = [anchor.k_id], [anchor.v_id]
    else:
        qs, ks, vs = _split_heads(q, n_heads), _split_heads(k, n_heads), _split_heads(v, n_heads)
        if not skip:
            aks, avs = _split_heads(anchor.k_id, n_heads), _split_heads(anchor.v_id, n_heads)
    for h in range(n_heads):
        base = scaled_dot_attention(qs[h], ks[h], vs[h])
        if not skip:
            branch = scaled_dot_attention(qs[h], aks[h], avs[h])
            if isinstance(w_final, Tensor):
                branch = branch * w_final
            else:
                branch = scale(branch, w_final)
            base = base + branch
        heads_out.append(base)
    return heads_out[0] if n_heads == 1 else concat(heads_out, axis=-1)
