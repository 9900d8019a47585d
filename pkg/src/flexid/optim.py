"""Adam optimizer over named parameter tensors."""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionError, ValidationError
from .tensor import Tensor


class AdamState:
    """First/second moment accumulators plus the step counter."""

    def __init__(self, params: dict[str, Tensor]):
        self.step = 0
        self.m = {k: np.zeros(p.shape, dtype=np.float64) for k, p in params.items()}
        self.v = {k: np.zeros(p.shape, dtype=np.float64) for k, p in params.items()}


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One in-place Adam update with bias correction.

    At step t the update per parameter is

        m <- b1*m + (1-b1)*g ;  v <- b2*v + (1-b2)*g^2
        p <- p - lr * m_hat / (sqrt(v_hat) + eps * sqrt(1-b2^t)/(1-b1^t))

    with m_hat = m/(1-b1^t), v_hat = v/(1-b2^t).  The epsilon term is
    scaled by the same bias-correction ratio as the step size, so the
    first iterate is exactly -lr*g/(|g| + eps*sqrt(1-b2)/(1-b1)).
    """
    if lr <= 0:
        raise ValidationError(f"learning rate must be positive, got {lr}")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    eps_t = eps * math.sqrt(c2) / c1
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros(p.shape, dtype=np.float64)
        g = np.asarray(g, dtype=np.float64)
        if g.shape != p.shape:
            raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.shape} for {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / c1
        v_hat = v / c2
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps_t)
