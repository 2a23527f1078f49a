from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..tensorgrad import Tensor

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8


@dataclass
class AdamState:
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params: list, grads: list, state: AdamState, lr: float,
              beta1: float = BETA1, beta2: float = BETA2, eps: float = EPS) -> AdamState:
    """In-place bias-corrected Adam update. ``params`` are Tensors or arrays; a ``None`` grad is zero."""
    if not state.m:
        state.m = [np.zeros(np.shape(_arr(p))) for p in params]
        state.v = [np.zeros(np.shape(_arr(p))) for p in params]
    if len(state.m) != len(params) or len(grads) != len(params):
        raise ValueError("params, grads and optimizer state differ in length")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            g = 0.0
        data = _arr(p)
        if np.shape(g) not in ((), data.shape):
            raise ValueError(f"gradient shape {np.shape(g)} does not match parameter {data.shape}")
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


def _arr(p) -> np.ndarray:
    return p.data if isinstance(p, Tensor) else p


def clip_grad_norm(grads: list, max_norm: float) -> float:
    """Scale gradients in place so their global L2 norm is at most ``max_norm``; returns the pre-clip norm."""
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads if g is not None))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads:
            if g is not None:
                g *= scale
    return total
