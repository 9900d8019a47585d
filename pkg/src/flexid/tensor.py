"""Dense float64 tensors with tape-based reverse-mode differentiation.

The primitive set is deliberately small: matmul, add/sub/mul, scalar
scale, row softmax, layernorm, gelu, transpose, slice/concat, embedding
gather and full sum.  Everything else in the package is composed from
these.  Recording happens only inside an active ``Tape`` context, so
inference re-uses the same forward code with no tape overhead.

All data is float64 and row-major.  Operands may carry one leading
batch axis (rank 3); gradients are reduced back to the original operand
shapes when broadcasting was involved.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.special import erf

from .errors import ContractError, DimensionError, ValidationError

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


class Tensor:
    """A shaped block of float64 values, optionally marked trainable."""

    __slots__ = ("data", "requires_grad")

    def __init__(self, data, requires_grad: bool = False, _internal: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not _internal and not np.all(np.isfinite(arr)):
            raise ValidationError("tensor values must be finite")
        self.data = arr
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        return float(self.data)

    def copy(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=self.requires_grad, _internal=True)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # Small amount of operator sugar; semantics match the free functions.
    def __add__(self, other):
        return add(self, _wrap(other))

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# Tape machinery


class Tape:
    """Ordered record of primitive applications for the reverse pass."""

    def __init__(self):
        # entries: (output, inputs, backward_fn)
        self._entries: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []

    def __enter__(self) -> "Tape":
        _ACTIVE.append(self)
        return self

    def __exit__(self, *exc):
        _ACTIVE.pop()
        return False

    def __len__(self) -> int:
        return len(self._entries)


_ACTIVE: list[Tape] = []


def _emit(out_data: np.ndarray, inputs: tuple[Tensor, ...], bwd: Callable) -> Tensor:
    """Create an op output and record it on the active tape if needed.

    ``bwd(grad_out)`` must return one gradient array (or None) per input.
    """
    out = Tensor(out_data, _internal=True)
    if _ACTIVE:
        tape = _ACTIVE[-1]
        if any(t.requires_grad for t in inputs):
            out.requires_grad = True
            tape._entries.append((out, inputs, bwd))
    return out


def backward(tape: Tape, loss: Tensor, params: Sequence[Tensor] | None = None):
    """Reverse pass over ``tape`` seeded at the scalar ``loss``.

    Returns a dict mapping each participating trainable leaf to its
    gradient array.  If ``params`` is given, returns instead a list of
    gradients aligned with it (zeros for parameters the loss does not
    depend on).  Gradient shapes always equal parameter shapes.
    """
    if loss.data.shape != ():
        raise ContractError(f"loss must be scalar, got shape {loss.data.shape}")
    produced = {id(out) for out, _, _ in tape._entries}
    grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=np.float64)}
    leaves: dict[int, tuple[Tensor, np.ndarray]] = {}
    for out, inputs, bwd in reversed(tape._entries):
        g = grads.pop(id(out), None)
        if g is None:
            continue
        for inp, gi in zip(inputs, bwd(g)):
            if gi is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in produced:
                acc = grads.get(key)
                grads[key] = gi if acc is None else acc + gi
            else:
                if key in leaves:
                    leaves[key] = (inp, leaves[key][1] + gi)
                else:
                    leaves[key] = (inp, gi.copy() if gi.base is not None else gi)
    by_leaf = {t: g for t, g in leaves.values()}
    if params is None:
        return by_leaf
    return [by_leaf.get(p, np.zeros(p.shape, dtype=np.float64)) for p in params]


# ---------------------------------------------------------------------------
# Broadcasting helpers


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, (gs, ss) in enumerate(zip(g.shape, shape)) if ss == 1 and gs != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# ---------------------------------------------------------------------------
# Primitives


def add(a: Tensor, b: Tensor) -> Tensor:
    out = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _emit(out, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = a.data - b.data

    def bwd(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _emit(out, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = a.data * b.data

    def bwd(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _emit(out, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = a.data * c

    def bwd(g):
        return (g * c,)

    return _emit(out, (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; operands of rank >= 2, leading axes broadcast."""
    if a.ndim < 2 or b.ndim < 2:
        raise DimensionError(f"matmul needs rank >= 2 operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def bwd(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _emit(out, (a, b), bwd)


def transpose(a: Tensor) -> Tensor:
    """Swap the last two axes."""
    if a.ndim < 2:
        raise DimensionError(f"transpose needs rank >= 2, got {a.shape}")
    out = np.swapaxes(a.data, -1, -2)

    def bwd(g):
        return (np.swapaxes(g, -1, -2),)

    return _emit(out, (a,), bwd)


def softmax_rows(x: Tensor) -> Tensor:
    """Row-stabilised softmax along the last axis.

    Each row of the result is non-negative and sums to one; the per-row
    maximum is subtracted before exponentiation.
    """
    m = np.max(x.data, axis=-1, keepdims=True)
    e = np.exp(x.data - m)
    out = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        s = out
        dot = np.sum(g * s, axis=-1, keepdims=True)
        return (s * (g - dot),)

    return _emit(out, (x,), bwd)


def layernorm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise the last axis to zero mean / unit variance, then affine."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gain.data + bias.data

    def bwd(g):
        d = x.shape[-1]
        dgain = _unbroadcast(g * xhat, gain.shape)
        dbias = _unbroadcast(g, bias.shape)
        dxhat = g * gain.data
        dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                    - xhat * (dxhat * xhat).sum(axis=-1, keepdims=True) / d)
        return dx, dgain, dbias

    return _emit(out, (x, gain, bias), bwd)


def gelu(x: Tensor) -> Tensor:
    """Exact erf-based GELU."""
    phi = 0.5 * (1.0 + erf(x.data * _INV_SQRT2))
    out = x.data * phi

    def bwd(g):
        pdf = np.exp(-0.5 * x.data * x.data) * _INV_SQRT2PI
        return (g * (phi + x.data * pdf),)

    return _emit(out, (x,), bwd)


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    idx = [slice(None)] * x.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    out = x.data[idx]

    def bwd(g):
        full = np.zeros(x.shape, dtype=np.float64)
        full[idx] = g
        return (full,)

    return _emit(out, (x,), bwd)


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    out = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]

    def bwd(g):
        grads = []
        offset = 0
        for p, n in zip(parts, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offset, offset + n)
            grads.append(g[tuple(idx)])
            offset += n
        return tuple(grads)

    return _emit(out, tuple(parts), bwd)


def gather_rows(table: Tensor, indices: np.ndarray) -> Tensor:
    """Embedding lookup: rows of ``table`` selected by an int index array."""
    idx = np.asarray(indices)
    if idx.min() < 0 or idx.max() >= table.shape[0]:
        raise ValidationError(f"gather index out of range for table with {table.shape[0]} rows")
    out = table.data[idx]

    def bwd(g):
        dt = np.zeros(table.shape, dtype=np.float64)
        np.add.at(dt, idx, g)
        return (dt,)

    return _emit(out, (table,), bwd)


def reshape(x: Tensor, shape: tuple) -> Tensor:
    out = x.data.reshape(shape)

    def bwd(g):
        return (g.reshape(x.shape),)

    return _emit(out, (x,), bwd)


def sum_all(x: Tensor) -> Tensor:
    out = x.data.sum()

    def bwd(g):
        return (np.broadcast_to(g, x.shape).astype(np.float64),)

    return _emit(np.asarray(out), (x,), bwd)


def mean_all(x: Tensor) -> Tensor:
    return scale(sum_all(x), 1.0 / x.data.size)


# ---------------------------------------------------------------------------
# Attention


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """Softmax(Q Kᵀ / sqrt(d)) V.

    ``q`` is (..., nq, d), ``k`` is (..., s, d) and ``v`` is (..., s, dv).
    """
    if q.shape[-1] != k.shape[-1]:
        raise DimensionError(f"query/key widths disagree: {q.shape} vs {k.shape}")
    if k.shape[-2] != v.shape[-2]:
        raise DimensionError(f"key/value sequence lengths disagree: {k.shape} vs {v.shape}")
    d = q.shape[-1]
    scores = scale(matmul(q, transpose(k)), 1.0 / math.sqrt(d))
    return matmul(softmax_rows(scores), v)
