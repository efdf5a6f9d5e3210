"""Layer kernels with hand-written backward passes.

Every ``*_forward`` returns ``(out, cache)``; the matching ``*_backward``
takes that cache and the upstream gradient and returns gradients for every
input, in argument order.
"""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class DimensionError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def _expect(cond: bool, msg: str) -> None:
    if not cond:
        raise DimensionError(msg)


# --------------------------------------------------------------------- linear

def linear_forward(x, weight, bias):
    _expect(x.ndim == 2, f"linear: input must be [B,I], got shape {x.shape}")
    _expect(weight.ndim == 2, f"linear: weight must be [O,I], got shape {weight.shape}")
    _expect(x.shape[1] == weight.shape[1],
            f"linear: input axis 1 (I={x.shape[1]}) != weight axis 1 (I={weight.shape[1]})")
    _expect(bias.shape == (weight.shape[0],),
            f"linear: bias shape {bias.shape} != weight axis 0 (O={weight.shape[0]})")
    return x @ weight.T + bias, (x, weight)


def linear_backward(cache, g):
    x, weight = cache
    return g @ weight, g.T @ x, g.sum(axis=0)


# --------------------------------------------------------------------- conv1d

def conv_out_len(n: int, k: int, stride: int, padding: int) -> int:
    return (n + 2 * padding - k) // stride + 1


def conv1d_forward(x, kernel, bias, stride: int = 1, padding: int = 0):
    _expect(x.ndim == 3, f"conv1d: input must be [B,C,T], got shape {x.shape}")
    _expect(kernel.ndim == 3, f"conv1d: kernel must be [O,C,K], got shape {kernel.shape}")
    _expect(x.shape[1] == kernel.shape[1],
            f"conv1d: input channels C={x.shape[1]} != kernel axis 1 C={kernel.shape[1]}")
    _expect(bias.shape == (kernel.shape[0],), f"conv1d: bias shape {bias.shape} != (O,)")
    if stride < 1 or padding < 0:
        raise ConfigError(f"conv1d: stride={stride}, padding={padding} invalid")
    B, C, T = x.shape
    O, _, K = kernel.shape
    t_out = conv_out_len(T, K, stride, padding)
    if t_out < 1:
        raise ConfigError(f"conv1d: output length {t_out} < 1 (T={T}, K={K}, stride={stride}, padding={padding})")
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding))) if padding else x
    win = sliding_window_view(xp, K, axis=2)[:, :, ::stride][:, :, :t_out]  # [B,C,T',K]
    cols = win.transpose(0, 2, 1, 3).reshape(B * t_out, C * K)
    out = cols @ kernel.reshape(O, C * K).T + bias
    out = out.reshape(B, t_out, O).transpose(0, 2, 1)
    return out, (cols, kernel, x.shape, stride, padding, t_out)


def conv1d_backward(cache, g):
    cols, kernel, xshape, stride, padding, t_out = cache
    B, C, T = xshape
    O, _, K = kernel.shape
    g2 = g.transpose(0, 2, 1).reshape(B * t_out, O)
    grad_kernel = (g2.T @ cols).reshape(kernel.shape)
    grad_bias = g2.sum(axis=0)
    dcols = (g2 @ kernel.reshape(O, C * K)).reshape(B, t_out, C, K)
    dxp = np.zeros((B, C, T + 2 * padding), dtype=g.dtype)
    span = stride * (t_out - 1) + 1
    for k in range(K):
        dxp[:, :, k:k + span:stride] += dcols[:, :, :, k].transpose(0, 2, 1)
    dx = dxp[:, :, padding:padding + T] if padding else dxp
    return dx, grad_kernel, grad_bias


# --------------------------------------------------------------------- conv2d

def conv2d_forward(x, kernel, bias, stride: int = 1, padding: int = 0):
    _expect(x.ndim == 4, f"conv2d: input must be [B,C,H,W], got shape {x.shape}")
    _expect(kernel.ndim == 4, f"conv2d: kernel must be [O,C,Kh,Kw], got shape {kernel.shape}")
    _expect(x.shape[1] == kernel.shape[1],
            f"conv2d: input channels C={x.shape[1]} != kernel axis 1 C={kernel.shape[1]}")
    _expect(bias.shape == (kernel.shape[0],), f"conv2d: bias shape {bias.shape} != (O,)")
    if stride < 1 or padding < 0:
        raise ConfigError(f"conv2d: stride={stride}, padding={padding} invalid")
    B, C, H, W = x.shape
    O, _, kh, kw = kernel.shape
    h_out = conv_out_len(H, kh, stride, padding)
    w_out = conv_out_len(W, kw, stride, padding)
    if h_out < 1 or w_out < 1:
        raise ConfigError(f"conv2d: output size {h_out}x{w_out} < 1")
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride][:, :, :h_out, :w_out]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(B * h_out * w_out, C * kh * kw)
    out = cols @ kernel.reshape(O, -1).T + bias
    out = out.reshape(B, h_out, w_out, O).transpose(0, 3, 1, 2)
    return out, (cols, kernel, x.shape, stride, padding, h_out, w_out)


def conv2d_backward(cache, g):
    cols, kernel, xshape, stride, padding, h_out, w_out = cache
    B, C, H, W = xshape
    O, _, kh, kw = kernel.shape
    g2 = g.transpose(0, 2, 3, 1).reshape(B * h_out * w_out, O)
    grad_kernel = (g2.T @ cols).reshape(kernel.shape)
    grad_bias = g2.sum(axis=0)
    dcols = (g2 @ kernel.reshape(O, -1)).reshape(B, h_out, w_out, C, kh, kw)
    dxp = np.zeros((B, C, H + 2 * padding, W + 2 * padding), dtype=g.dtype)
    hs = stride * (h_out - 1) + 1
    ws = stride * (w_out - 1) + 1
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i:i + hs:stride, j:j + ws:stride] += dcols[..., i, j].transpose(0, 3, 1, 2)
    dx = dxp[:, :, padding:padding + H, padding:padding + W] if padding else dxp
    return dx, grad_kernel, grad_bias


# ----------------------------------------------------------------- group norm

def group_norm_forward(x, num_groups: int, gain, shift, eps: float = 1e-5):
    _expect(x.ndim >= 2, f"group_norm: input must be [B,C,*], got shape {x.shape}")
    C = x.shape[1]
    if num_groups < 1 or C % num_groups:
        raise ConfigError(f"group_norm: C={C} not divisible by num_groups={num_groups}")
    if eps <= 0:
        raise ConfigError("group_norm: eps must be > 0")
    _expect(gain.shape == (C,) and shift.shape == (C,),
            f"group_norm: gain/shift must have shape ({C},)")
    B = x.shape[0]
    xg = x.reshape(B, num_groups, -1)
    mean = xg.mean(axis=2, keepdims=True)
    var = xg.var(axis=2, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mean) * inv_std).reshape(x.shape)
    bshape = (1, C) + (1,) * (x.ndim - 2)
    out = xhat * gain.reshape(bshape) + shift.reshape(bshape)
    return out, (xhat, inv_std, gain, num_groups)


def group_norm_backward(cache, g):
    xhat, inv_std, gain, num_groups = cache
    C = xhat.shape[1]
    B = xhat.shape[0]
    bshape = (1, C) + (1,) * (xhat.ndim - 2)
    red = (0,) + tuple(range(2, xhat.ndim))
    grad_gain = (g * xhat).sum(axis=red)
    grad_shift = g.sum(axis=red)
    dxhat = (g * gain.reshape(bshape)).reshape(B, num_groups, -1)
    xh = xhat.reshape(B, num_groups, -1)
    n = xh.shape[2]
    dx = inv_std / n * (n * dxhat - dxhat.sum(axis=2, keepdims=True)
                        - xh * (dxhat * xh).sum(axis=2, keepdims=True))
    return dx.reshape(xhat.shape), grad_gain, grad_shift


# ----------------------------------------------------------------- activation

ACTIVATIONS = ("relu", "silu")


def activation_forward(x, kind: str = "silu"):
    if kind == "relu":
        return np.maximum(x, 0), (x, kind)
    if kind == "silu":
        sig = 0.5 * (1.0 + np.tanh(0.5 * x))  # overflow-free logistic
        return x * sig, (x, kind, sig)
    raise ConfigError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def activation_backward(cache, g):
    x, kind = cache[0], cache[1]
    if kind == "relu":
        return g * (x > 0)
    sig = cache[2]
    return g * (sig * (1.0 + x * (1.0 - sig)))


# ------------------------------------------------------- timestep embedding

def sinusoidal_embed(k, dim: int, max_period: float = 10000.0, dtype=np.float32):
    """Embed integer step(s) ``k`` as ``[sin(k*f_0..f_h), cos(k*f_0..f_h)]``.

    Frequencies are ``max_period ** (-i / half)`` for ``i`` in ``0..half-1``.
    A scalar ``k`` gives shape ``[dim]``; an array of steps gives ``[len(k), dim]``.
    """
    if dim < 2 or dim % 2:
        raise ConfigError(f"sinusoidal_embed: dim must be a positive even integer, got {dim}")
    half = dim // 2
    freqs = np.exp(-math.log(max_period) * np.arange(half, dtype=np.float64) / half)
    ks = np.asarray(k, dtype=np.float64)
    if np.any(ks < 0):
        raise ConfigError("sinusoidal_embed: steps must be non-negative")
    args = ks[..., None] * freqs
    return np.concatenate([np.sin(args), np.cos(args)], axis=-1).astype(dtype)
