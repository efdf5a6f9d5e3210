"""Stateful layer wrappers around the kernels in :mod:`functional`.

A layer registers its parameters in a shared :class:`ParamStore` under a
name prefix, caches what it needs on ``forward`` and accumulates parameter
gradients on ``backward``. One forward must precede each backward.
"""
from __future__ import annotations

import numpy as np

from . import functional as F
from .params import ParamStore, kaiming_uniform


class Layer:
    def forward(self, x):
        raise NotImplementedError

    def backward(self, g):
        raise NotImplementedError

    __call__ = forward


class Linear(Layer):
    def __init__(self, store: ParamStore, name: str, n_in: int, n_out: int,
                 rng: np.random.Generator, zero_init: bool = False):
        w = np.zeros((n_out, n_in)) if zero_init else kaiming_uniform(rng, (n_out, n_in), n_in)
        self.w = store.add(f"{name}.weight", w)
        self.b = store.add(f"{name}.bias", np.zeros(n_out))
        self._cache = None

    def forward(self, x):
        out, self._cache = F.linear_forward(x, self.w.value, self.b.value)
        return out

    def backward(self, g):
        dx, dw, db = F.linear_backward(self._cache, g)
        self.w.grad += dw
        self.b.grad += db
        return dx


class Conv1d(Layer):
    def __init__(self, store: ParamStore, name: str, c_in: int, c_out: int, k: int,
                 rng: np.random.Generator, stride: int = 1, padding: int = 0,
                 zero_init: bool = False):
        shape = (c_out, c_in, k)
        w = np.zeros(shape) if zero_init else kaiming_uniform(rng, shape, c_in * k)
        self.w = store.add(f"{name}.weight", w)
        self.b = store.add(f"{name}.bias", np.zeros(c_out))
        self.stride, self.padding = stride, padding
        self._cache = None

    def forward(self, x):
        out, self._cache = F.conv1d_forward(x, self.w.value, self.b.value, self.stride, self.padding)
        return out

    def backward(self, g):
        dx, dw, db = F.conv1d_backward(self._cache, g)
        self.w.grad += dw
        self.b.grad += db
        return dx


class Conv2d(Layer):
    def __init__(self, store: ParamStore, name: str, c_in: int, c_out: int, k: int,
                 rng: np.random.Generator, stride: int = 1, padding: int = 0):
        shape = (c_out, c_in, k, k)
        self.w = store.add(f"{name}.weight", kaiming_uniform(rng, shape, c_in * k * k))
        self.b = store.add(f"{name}.bias", np.zeros(c_out))
        self.stride, self.padding = stride, padding
        self._cache = None

    def forward(self, x):
        out, self._cache = F.conv2d_forward(x, self.w.value, self.b.value, self.stride, self.padding)
        return out

    def backward(self, g):
        dx, dw, db = F.conv2d_backward(self._cache, g)
        self.w.grad += dw
        self.b.grad += db
        return dx


class GroupNorm(Layer):
    def __init__(self, store: ParamStore, name: str, channels: int, groups: int, eps: float = 1e-5):
        if groups < 1 or channels % groups:
            raise F.ConfigError(f"{name}: channels={channels} not divisible by groups={groups}")
        self.gain = store.add(f"{name}.gain", np.ones(channels))
        self.shift = store.add(f"{name}.shift", np.zeros(channels))
        self.groups, self.eps = groups, eps
        self._cache = None

    def forward(self, x):
        out, self._cache = F.group_norm_forward(x, self.groups, self.gain.value, self.shift.value, self.eps)
        return out

    def backward(self, g):
        dx, dgain, dshift = F.group_norm_backward(self._cache, g)
        self.gain.grad += dgain
        self.shift.grad += dshift
        return dx


class Activation(Layer):
    def __init__(self, kind: str = "silu"):
        if kind not in F.ACTIVATIONS:
            raise F.ConfigError(f"unknown activation {kind!r}")
        self.kind = kind
        self._cache = None

    def forward(self, x):
        out, self._cache = F.activation_forward(x, self.kind)
        return out

    def backward(self, g):
        return F.activation_backward(self._cache, g)


class Sequential(Layer):
    def __init__(self, *layers: Layer):
        self.layers = list(layers)

    def forward(self, x):
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def backward(self, g):
        for layer in reversed(self.layers):
            g = layer.backward(g)
        return g


class FiLM:
    """Feature-wise modulation ``h * (1 + gain) + shift``.

    ``gain`` and ``shift`` are [B, C]; ``h`` is [B, C] or [B, C, T].
    """

    def forward(self, h, gain, shift):
        extra = (1,) * (h.ndim - 2)
        gs = gain.reshape(gain.shape + extra)
        self._cache = (h, gs, h.ndim)
        return h * (1.0 + gs) + shift.reshape(shift.shape + extra)

    def backward(self, g):
        h, gs, ndim = self._cache
        red = tuple(range(2, ndim))
        dh = g * (1.0 + gs)
        dgain = (g * h).sum(axis=red) if red else g * h
        dshift = g.sum(axis=red) if red else g
        return dh, dgain, dshift
