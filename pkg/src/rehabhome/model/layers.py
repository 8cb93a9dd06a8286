"""Neural network layers in float64 numpy with explicit backward passes.

Everything here is exercised end to end by the finite-difference gradient
check, so forward/backward pairs must stay exactly consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np


@dataclass
class Parameter:
    name: str
    value: np.ndarray
    grad: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        self.value = np.asarray(self.value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    def zero_grad(self) -> None:
        self.grad[...] = 0.0


def kaiming_uniform(shape: Tuple[int, ...], fan_in: int, rng: np.random.Generator) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    train_mode: bool = False

    def parameters(self) -> List[Parameter]:
        return []

    def buffers(self) -> Dict[str, np.ndarray]:
        return {}


class Linear(Layer):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, name: str, zero_init: bool = False):
        if zero_init:
            w = np.zeros((in_features, out_features))
            b = np.zeros(out_features)
        else:
            w = kaiming_uniform((in_features, out_features), in_features, rng)
            b = kaiming_uniform((out_features,), in_features, rng)
        self.W = Parameter(f"{name}.W", w)
        self.b = Parameter(f"{name}.b", b)
        self._x: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return x @ self.W.value + self.b.value

    def backward(self, dy: np.ndarray) -> np.ndarray:
        self.W.grad += self._x.T @ dy
        self.b.grad += dy.sum(axis=0)
        return dy @ self.W.value.T

    def parameters(self) -> List[Parameter]:
        return [self.W, self.b]


class ReLU(Layer):
    def __init__(self) -> None:
        self._mask: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy * self._mask


class Dropout(Layer):
    """Inverted dropout; identity when not in train mode."""

    def __init__(self, p: float, rng: np.random.Generator):
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout p must be in [0, 1), got {p}")
        self.p = p
        self.rng = rng
        self._mask: Optional[np.ndarray] = None

    def forward(self, x: np.ndarray) -> np.ndarray:
        if not self.train_mode or self.p == 0.0:
            self._mask = None
            return x
        self._mask = (self.rng.random(x.shape) >= self.p) / (1.0 - self.p)
        return x * self._mask

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._mask is None:
            return dy
        return dy * self._mask


class BatchNorm(Layer):
    """Batch normalization over axis 0 (and spatial axes for 4-D inputs).

    Training uses batch statistics and updates running estimates with
    momentum 0.1; inference normalizes with the running estimates.
    """

    def __init__(self, num_features: int, name: str, momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = Parameter(f"{name}.gamma", np.ones(num_features))
        self.beta = Parameter(f"{name}.beta", np.zeros(num_features))
        self.momentum = momentum
        self.eps = eps
        self.running_mean = np.zeros(num_features)
        self.running_var = np.ones(num_features)
        self.name = name
        self._cache = None

    def _moments_axes(self, x: np.ndarray):
        if x.ndim == 2:
            return (0,), (1, -1)
        if x.ndim == 4:
            return (0, 2, 3), (1, -1, 1, 1)
        raise ValueError(f"batchnorm expects 2-D or 4-D input, got {x.ndim}-D")

    def forward(self, x: np.ndarray) -> np.ndarray:
        axes, shape = self._moments_axes(x)
        view = lambda v: v.reshape(shape)
        if self.train_mode:
            mean = x.mean(axis=axes)
            var = x.var(axis=axes)
            self.running_mean = (1 - self.momentum) * self.running_mean + self.momentum * mean
            self.running_var = (1 - self.momentum) * self.running_var + self.momentum * var
        else:
            mean = self.running_mean
            var = self.running_var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - view(mean)) * view(inv_std)
        self._cache = (xhat, inv_std, axes, shape, x.shape)
        return view(self.gamma.value) * xhat + view(self.beta.value)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        xhat, inv_std, axes, shape, x_shape = self._cache
        view = lambda v: v.reshape(shape)
        self.gamma.grad += (dy * xhat).sum(axis=axes)
        self.beta.grad += dy.sum(axis=axes)
        g = view(self.gamma.value) * view(inv_std)
        if not self.train_mode:
            return dy * g
        m = 1
        for axis in axes:
            m *= x_shape[axis]
        dy_sum = dy.sum(axis=axes)
        dyxhat_sum = (dy * xhat).sum(axis=axes)
        return g * (dy - view(dy_sum) / m - xhat * view(dyxhat_sum) / m)

    def parameters(self) -> List[Parameter]:
        return [self.gamma, self.beta]

    def buffers(self) -> Dict[str, np.ndarray]:
        return {f"{self.name}.running_mean": self.running_mean, f"{self.name}.running_var": self.running_var}


class Conv2d(Layer):
    """3x3 convolution via im2col; default stride 2, padding 1."""

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        rng: np.random.Generator,
        name: str,
        kernel: int = 3,
        stride: int = 2,
        padding: int = 1,
    ):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel = kernel
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel * kernel
        self.W = Parameter(f"{name}.W", kaiming_uniform((fan_in, out_channels), fan_in, rng))
        self.b = Parameter(f"{name}.b", kaiming_uniform((out_channels,), fan_in, rng))
        self._cache = None

    def out_size(self, h: int, w: int) -> Tuple[int, int]:
        k, s, p = self.kernel, self.stride, self.padding
        return (h + 2 * p - k) // s + 1, (w + 2 * p - k) // s + 1

    def _indices(self, h: int, w: int):
        k, s, p = self.kernel, self.stride, self.padding
        oh, ow = self.out_size(h, w)
        c_idx = np.repeat(np.arange(self.in_channels), k * k).reshape(-1, 1)
        ky, kx = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
        ky = np.tile(ky.reshape(-1), self.in_channels).reshape(-1, 1)
        kx = np.tile(kx.reshape(-1), self.in_channels).reshape(-1, 1)
        oy, ox = np.meshgrid(np.arange(oh), np.arange(ow), indexing="ij")
        y_idx = ky + (oy.reshape(-1) * s)[None, :]
        x_idx = kx + (ox.reshape(-1) * s)[None, :]
        return c_idx, y_idx, x_idx, oh, ow

    def forward(self, x: np.ndarray) -> np.ndarray:
        n, c, h, w = x.shape
        if c != self.in_channels:
            raise ValueError(f"expected {self.in_channels} input channels, got {c}")
        p = self.padding
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        c_idx, y_idx, x_idx, oh, ow = self._indices(h, w)
        cols = xp[:, c_idx, y_idx, x_idx]  # (n, C*k*k, oh*ow)
        flat = cols.transpose(0, 2, 1).reshape(n * oh * ow, -1)
        out = flat @ self.W.value + self.b.value
        self._cache = (flat, (n, c, h, w), (c_idx, y_idx, x_idx, oh, ow))
        return out.reshape(n, oh, ow, self.out_channels).transpose(0, 3, 1, 2)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        flat, (n, c, h, w), (c_idx, y_idx, x_idx, oh, ow) = self._cache
        dflat = dy.transpose(0, 2, 3, 1).reshape(n * oh * ow, self.out_channels)
        self.W.grad += flat.T @ dflat
        self.b.grad += dflat.sum(axis=0)
        dcols = (dflat @ self.W.value.T).reshape(n, oh * ow, -1).transpose(0, 2, 1)
        p = self.padding
        dxp = np.zeros((n, c, h + 2 * p, w + 2 * p))
        np.add.at(dxp, (np.arange(n)[:, None, None], c_idx[None], y_idx[None], x_idx[None]), dcols)
        return dxp[:, :, p : p + h, p : p + w] if p else dxp

    def parameters(self) -> List[Parameter]:
        return [self.W, self.b]


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy and gradient w.r.t. logits."""
    probs = softmax(logits)
    n = logits.shape[0]
    eps = 1e-300
    loss = float(-np.log(probs[np.arange(n), labels] + eps).mean())
    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n
