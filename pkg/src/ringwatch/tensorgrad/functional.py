"""Fused differentiable layers with hand-written adjoints."""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import DTYPE, ShapeError, Tensor, _lift, unbroadcast


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = _lift(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - np.sum(g * out, axis=axis, keepdims=True)),)

    return Tensor._make(out, (x,), backward)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = _lift(x)
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    lse = np.log(np.sum(np.exp(shifted), axis=axis, keepdims=True))
    out = shifted - lse
    sm = np.exp(out)

    def backward(g):
        return (g - sm * np.sum(g, axis=axis, keepdims=True),)

    return Tensor._make(out, (x,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale by ``gamma`` and shift by ``beta``."""
    if eps <= 0:
        raise ValueError("layer_norm eps must be positive")
    x, gamma, beta = _lift(x), _lift(gamma), _lift(beta)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = xhat * gamma.data + beta.data

    def backward(g):
        gx = None
        if x.requires_grad:
            gh = g * gamma.data
            gx = inv * (gh - gh.mean(axis=-1, keepdims=True) - xhat * (gh * xhat).mean(axis=-1, keepdims=True))
        gg = unbroadcast(g * xhat, gamma.shape) if gamma.requires_grad else None
        gb = unbroadcast(g, beta.shape) if beta.requires_grad else None
        return gx, gg, gb

    return Tensor._make(out, (x, gamma, beta), backward)


def conv1d(x: Tensor, kernel: Tensor, bias: Tensor | None = None, stride: int = 1, padding: str = "same") -> Tensor:
    """Cross-correlation along time (no kernel flip).

    ``x`` is (..., T, c_in), ``kernel`` is (w, c_in, c_out). ``same`` padding
    zero-pads ``(w - 1) // 2`` frames on the left and the rest on the right.
    """
    x, kernel = _lift(x), _lift(kernel)
    if stride < 1:
        raise ValueError("conv1d stride must be >= 1")
    if padding not in ("same", "valid"):
        raise ValueError(f"unknown padding {padding!r}")
    w, c_in, c_out = kernel.shape
    if x.shape[-1] != c_in:
        raise ShapeError(f"conv1d channels differ: input {x.shape} vs kernel {kernel.shape}")
    T = x.shape[-2]
    if padding == "same":
        left = (w - 1) // 2
        right = w - 1 - left
    else:
        left = right = 0
    if T + left + right < w:
        raise ShapeError(f"conv1d kernel width {w} exceeds padded input length {T + left + right}")
    pad = [(0, 0)] * (x.ndim - 2) + [(left, right), (0, 0)]
    xp = np.pad(x.data, pad) if left or right else x.data
    # windows: (..., T', c_in, w) -> (..., T', w, c_in)
    win = sliding_window_view(xp, w, axis=-2)[..., ::stride, :, :]
    win = np.swapaxes(win, -1, -2)
    t_out = win.shape[-3]
    cols = win.reshape(-1, w * c_in)
    kmat = kernel.data.reshape(w * c_in, c_out)
    out = (cols @ kmat).reshape(x.shape[:-2] + (t_out, c_out))
    parents = [x, kernel]
    if bias is not None:
        bias = _lift(bias)
        out = out + bias.data
        parents.append(bias)

    def backward(g):
        g2 = g.reshape(-1, c_out)
        gk = (cols.T @ g2).reshape(w, c_in, c_out) if kernel.requires_grad else None
        gx = None
        if x.requires_grad:
            gcols = (g2 @ kmat.T).reshape(x.shape[:-2] + (t_out, w, c_in))
            gxp = np.zeros(xp.shape, dtype=DTYPE)
            for j in range(w):
                stop = j + stride * (t_out - 1) + 1
                gxp[..., j:stop:stride, :] += gcols[..., :, j, :]
            gx = gxp[..., left : left + T, :]
        grads = [gx, gk]
        if bias is not None:
            grads.append(unbroadcast(g, bias.shape))
        return tuple(grads)

    return Tensor._make(out, parents, backward)


def mse(pred: Tensor, target) -> Tensor:
    diff = pred - _lift(target)
    return (diff * diff).mean()
