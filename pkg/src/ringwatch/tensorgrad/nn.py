"""Neural layers built on the tensor primitives."""

from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import functional as F
from .tensor import ShapeError, Tensor, add, linear, matmul, stack, swapaxes

# Feed-forward activation inside transformer and fusion blocks.
FF_ACTIVATION = "relu"


class ConfigError(ValueError):
    """Raised for invalid layer or model hyper-parameters."""


def uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> Tensor:
    bound = math.sqrt(1.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


class Module:
    """Parameter container; child modules and parameters are found by attribute walk."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in self.__dict__.items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, bias: bool = True):
        self.weight = uniform_init(rng, (d_in, d_out), d_in)
        self.bias = uniform_init(rng, (d_out,), d_in) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias)


class Conv1d(Module):
    def __init__(self, c_in: int, c_out: int, width: int, rng: np.random.Generator, padding: str = "same", stride: int = 1):
        fan_in = c_in * width
        self.kernel = uniform_init(rng, (width, c_in, c_out), fan_in)
        self.bias = uniform_init(rng, (c_out,), fan_in)
        self.padding = padding
        self.stride = stride

    def forward(self, x: Tensor) -> Tensor:
        return F.conv1d(x, self.kernel, self.bias, stride=self.stride, padding=self.padding)


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-5):
        self.gamma = Tensor(np.ones(d), requires_grad=True)
        self.beta = Tensor(np.zeros(d), requires_grad=True)
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gamma, self.beta, self.eps)


class LSTMLayer(Module):
    """Single LSTM layer, gate order (input, forget, candidate, output)."""

    def __init__(self, d_in: int, d_hidden: int, rng: np.random.Generator):
        self.d_hidden = d_hidden
        self.w_ih = uniform_init(rng, (d_in, 4 * d_hidden), d_in)
        self.w_hh = uniform_init(rng, (d_hidden, 4 * d_hidden), d_hidden)
        self.bias = uniform_init(rng, (4 * d_hidden,), d_hidden)

    def forward(self, x: Tensor) -> Tensor:
        h_dim = self.d_hidden
        T = x.shape[-2]
        batch = x.shape[:-2]
        xw = linear(x, self.w_ih, self.bias)
        h = Tensor(np.zeros(batch + (h_dim,)))
        c = Tensor(np.zeros(batch + (h_dim,)))
        outputs = []
        for t in range(T):
            gates = add(xw[..., t, :], matmul(h, self.w_hh))
            s = gates.sigmoid()
            i = s[..., :h_dim]
            f = s[..., h_dim : 2 * h_dim]
            g = gates[..., 2 * h_dim : 3 * h_dim].tanh()
            o = s[..., 3 * h_dim :]
            c = f * c + i * g
            h = o * c.tanh()
            outputs.append(h)
        return stack(outputs, axis=-2)


class LSTM(Module):
    def __init__(self, d_in: int, d_hidden: int, layers: int, rng: np.random.Generator):
        if layers < 1:
            raise ConfigError("LSTM needs at least one layer")
        self.layers = [LSTMLayer(d_in if i == 0 else d_hidden, d_hidden, rng) for i in range(layers)]

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer(x)
        return x


def lstm_forward(x: Tensor, params: LSTM, layers: int | None = None) -> Tensor:
    """Full hidden sequence of a stacked LSTM started from zero states."""
    if layers is not None and layers != len(params.layers):
        raise ConfigError(f"parameter set has {len(params.layers)} layers, asked for {layers}")
    return params(x)


def scaled_dot_product_attention(q: Tensor, k: Tensor, v: Tensor) -> tuple[Tensor, Tensor]:
    """Returns (output, attention weights); the last axis of the weights sums to 1."""
    scale = 1.0 / math.sqrt(q.shape[-1])
    scores = matmul(q, swapaxes(k, -1, -2)) * scale
    weights = F.softmax(scores, axis=-1)
    return matmul(weights, v), weights


class MultiHeadAttention(Module):
    def __init__(self, d: int, heads: int, rng: np.random.Generator):
        if heads < 1 or d % heads:
            raise ConfigError(f"model width {d} is not divisible by {heads} heads")
        self.d = d
        self.heads = heads
        self.q_proj = Linear(d, d, rng)
        self.k_proj = Linear(d, d, rng)
        self.v_proj = Linear(d, d, rng)
        self.out_proj = Linear(d, d, rng)
        self.last_weights: np.ndarray | None = None

    def _split(self, x: Tensor) -> Tensor:
        T = x.shape[-2]
        lead = x.shape[:-2]
        x = x.reshape(lead + (T, self.heads, self.d // self.heads))
        return swapaxes(x, -2, -3)

    def forward(self, q: Tensor, k: Tensor, v: Tensor) -> Tensor:
        if q.shape[-1] != self.d or k.shape[-1] != self.d or v.shape[-1] != self.d:
            raise ShapeError(f"attention width {self.d} does not match inputs {q.shape}, {k.shape}, {v.shape}")
        qh = self._split(self.q_proj(q))
        kh = self._split(self.k_proj(k))
        vh = self._split(self.v_proj(v))
        out, weights = scaled_dot_product_attention(qh, kh, vh)
        self.last_weights = weights.data
        out = swapaxes(out, -2, -3)
        out = out.reshape(out.shape[:-2] + (self.d,))
        return self.out_proj(out)


def multi_head_attention(q: Tensor, k: Tensor, v: Tensor, heads: int, layer: MultiHeadAttention | None = None, rng=None) -> Tensor:
    """Functional entry point; builds a fresh projection set when none is given."""
    if layer is None:
        layer = MultiHeadAttention(q.shape[-1], heads, rng if rng is not None else np.random.default_rng(0))
    elif layer.heads != heads:
        raise ConfigError(f"layer has {layer.heads} heads, asked for {heads}")
    return layer(q, k, v)


class FeedForward(Module):
    def __init__(self, d_in: int, d_hidden: int, d_out: int, rng: np.random.Generator):
        self.fc1 = Linear(d_in, d_hidden, rng)
        self.fc2 = Linear(d_hidden, d_out, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(self.fc1(x).relu())


class TransformerEncoderLayer(Module):
    """Post-norm encoder block: LN(x + MHA(x)) then LN(x + FF(x))."""

    def __init__(self, d: int, heads: int, ff_expansion: int, rng: np.random.Generator):
        self.attn = MultiHeadAttention(d, heads, rng)
        self.norm1 = LayerNorm(d)
        self.ff = FeedForward(d, ff_expansion * d, d, rng)
        self.norm2 = LayerNorm(d)

    def forward(self, x: Tensor) -> Tensor:
        x = self.norm1(x + self.attn(x, x, x))
        return self.norm2(x + self.ff(x))


def positional_encoding(T: int, d: int) -> np.ndarray:
    """Sinusoidal encoding: even columns sin, odd columns cos, frequency 10000^(-2i/d)."""
    if d % 2:
        raise ConfigError(f"positional encoding width must be even, got {d}")
    pos = np.arange(T, dtype=np.float64)[:, None]
    freq = 10000.0 ** (-np.arange(0, d, 2, dtype=np.float64) / d)
    pe = np.empty((T, d))
    pe[:, 0::2] = np.sin(pos * freq)
    pe[:, 1::2] = np.cos(pos * freq)
    return pe


__all__ = [
    "ConfigError",
    "Conv1d",
    "FeedForward",
    "LSTM",
    "LSTMLayer",
    "LayerNorm",
    "Linear",
    "Module",
    "MultiHeadAttention",
    "TransformerEncoderLayer",
    "lstm_forward",
    "multi_head_attention",
    "positional_encoding",
    "scaled_dot_product_attention",
    "uniform_init",
]
