"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return np.abs(analytic - numeric) / denom


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, eps: float = 1e-5, indices: Sequence[int] | None = None) -> float:
    """Max relative error between backprop and central differences of ``f`` at ``x``.

    ``indices`` restricts the check to those flat positions of ``x``.
    """
    if not 0 < eps <= 1e-3:
        raise ValueError("eps must lie in (0, 1e-3]")
    x.requires_grad = True
    x.grad = None
    f(x).backward()
    analytic = np.zeros(x.size) if x.grad is None else x.grad.reshape(-1).copy()
    flat = x.data.reshape(-1)
    picks = range(x.size) if indices is None else indices
    worst = 0.0
    for i in picks:
        orig = flat[i]
        flat[i] = orig + eps
        up = f(x).item()
        flat[i] = orig - eps
        down = f(x).item()
        flat[i] = orig
        numeric = (up - down) / (2 * eps)
        worst = max(worst, float(relative_error(np.array(analytic[i]), np.array(numeric))))
    return worst


def grad_check_params(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    n_samples: int = 50,
    eps: float = 1e-5,
    seed: int = 0,
) -> float:
    """Check ``n_samples`` randomly chosen scalar entries across ``params``."""
    for p in params:
        p.grad = None
    loss_fn().backward()
    sizes = np.array([p.size for p in params])
    rng = np.random.default_rng(seed)
    owners = rng.choice(len(params), size=n_samples, p=sizes / sizes.sum())
    worst = 0.0
    for owner in owners:
        p = params[owner]
        idx = int(rng.integers(p.size))
        flat = p.data.reshape(-1)
        analytic = 0.0 if p.grad is None else float(p.grad.reshape(-1)[idx])
        orig = flat[idx]
        flat[idx] = orig + eps
        up = loss_fn().item()
        flat[idx] = orig - eps
        down = loss_fn().item()
        flat[idx] = orig
        numeric = (up - down) / (2 * eps)
        worst = max(worst, float(relative_error(np.array(analytic), np.array(numeric))))
    return worst
