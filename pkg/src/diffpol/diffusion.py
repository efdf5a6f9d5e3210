"""DDPM noise schedule, forward noising, epsilon-prediction loss and ancestral sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .nncore import ConfigError, DimensionError

SCHEDULE_KINDS = ("linear", "cosine")


class ContractError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseSchedule:
    kind: str
    betas: np.ndarray  # f64 [K]
    beta_start: float = 1e-4
    beta_end: float = 0.02

    @property
    def K(self) -> int:
        return len(self.betas)

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.cumprod(self.alphas)

    def descriptor(self) -> dict:
        return {"kind": self.kind, "K": self.K, "beta_start": self.beta_start, "beta_end": self.beta_end}

    @classmethod
    def from_descriptor(cls, d: dict) -> "NoiseSchedule":
        return make_schedule(d["K"], d["kind"], d.get("beta_start", 1e-4), d.get("beta_end", 0.02))


def make_schedule(K: int, kind: str = "linear", beta_start: float = 1e-4,
                  beta_end: float = 0.02) -> NoiseSchedule:
    if not isinstance(K, (int, np.integer)) or K < 1:
        raise ConfigError(f"schedule: K must be an integer >= 1 (got {K!r})")
    if kind == "linear":
        if not (0.0 < beta_start <= beta_end < 1.0):
            raise ConfigError(f"schedule: need 0 < beta_start <= beta_end < 1 (got {beta_start}, {beta_end})")
        if K == 1:
            betas = np.array([beta_start], dtype=np.float64)
        else:
            betas = beta_start + (beta_end - beta_start) * np.arange(K, dtype=np.float64) / (K - 1)
    elif kind == "cosine":
        s = 0.008
        steps = np.arange(K + 1, dtype=np.float64)
        f = np.cos((steps / K + s) / (1 + s) * math.pi / 2) ** 2
        abar = f / f[0]
        betas = np.clip(1.0 - abar[1:] / abar[:-1], 1e-8, 0.999)
    else:
        raise ConfigError(f"schedule: kind must be one of {SCHEDULE_KINDS} (got {kind!r})")
    return NoiseSchedule(kind, betas, float(beta_start), float(beta_end))


def schedule_from_betas(betas: Sequence[float]) -> NoiseSchedule:
    b = np.asarray(betas, dtype=np.float64)
    if b.ndim != 1 or len(b) == 0 or np.any(b <= 0) or np.any(b >= 1):
        raise ConfigError("betas must be a non-empty vector with entries in (0, 1)")
    return NoiseSchedule("custom", b, float(b[0]), float(b[-1]))


def _check_k(k, sched: NoiseSchedule) -> np.ndarray:
    ks = np.asarray(k)
    if np.any(ks < 0) or np.any(ks >= sched.K):
        raise IndexError(f"diffusion step {k} outside [0, {sched.K})")
    return ks


def _bcast(v: np.ndarray, ndim: int) -> np.ndarray:
    return v.reshape(v.shape + (1,) * (ndim - v.ndim))


def add_noise(x0: np.ndarray, eps: np.ndarray, k, sched: NoiseSchedule) -> np.ndarray:
    """``sqrt(abar_k) * x0 + sqrt(1 - abar_k) * eps``; ``k`` may be one step per batch row."""
    if x0.shape != eps.shape:
        raise DimensionError(f"add_noise: x0 shape {x0.shape} != eps shape {eps.shape}")
    ks = _check_k(k, sched)
    abar = sched.alpha_bars[ks]
    if ks.ndim:
        abar = _bcast(abar, x0.ndim)
    out = np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * eps
    return out.astype(x0.dtype, copy=False)


class EpsModel(Protocol):
    """Anything that predicts noise and can push a gradient back through itself."""

    def forward(self, noisy: np.ndarray, k: np.ndarray, cond: np.ndarray) -> np.ndarray: ...

    def backward(self, g: np.ndarray) -> np.ndarray: ...


@dataclass
class DiffusionBatch:
    clean_actions: np.ndarray  # [B, T_p, A], normalized
    cond: np.ndarray  # [B, D_c]
    drawn_steps: np.ndarray  # [B] ints in [0, K)
    drawn_noise: np.ndarray  # [B, T_p, A]

    @classmethod
    def draw(cls, clean_actions, cond, sched: NoiseSchedule, rng: np.random.Generator) -> "DiffusionBatch":
        B = clean_actions.shape[0]
        steps = rng.integers(0, sched.K, size=B)
        noise = rng.standard_normal(clean_actions.shape).astype(clean_actions.dtype)
        return cls(clean_actions, cond, steps, noise)


def training_loss(model: EpsModel, batch: DiffusionBatch, sched: NoiseSchedule) -> tuple[float, np.ndarray]:
    """Noise-prediction MSE; runs backward through ``model``.

    Returns the loss and the gradient with respect to ``batch.cond`` so the
    caller can continue backpropagation into an observation encoder.
    """
    x0 = batch.clean_actions
    if np.any(np.abs(x0) > 1.0 + 1e-6):
        raise ContractError("training_loss: clean actions must be normalized to [-1, 1]")
    noisy = add_noise(x0, batch.drawn_noise, batch.drawn_steps, sched)
    pred = model.forward(noisy, batch.drawn_steps, batch.cond)
    if pred.shape != x0.shape:
        raise DimensionError(f"model output {pred.shape} != action shape {x0.shape}")
    diff = pred - batch.drawn_noise
    loss = float(np.mean(np.square(diff, dtype=np.float64)))
    g = (2.0 / diff.size) * diff
    gcond = model.backward(g.astype(pred.dtype, copy=False))
    return loss, gcond


def ddpm_step(x_k: np.ndarray, eps_hat: np.ndarray, k: int, sched: NoiseSchedule,
              z: np.ndarray | None = None) -> np.ndarray:
    """One reverse step ``x_k -> x_{k-1}`` with fixed variance ``sigma_k^2 = beta_k``."""
    _check_k(k, sched)
    beta = sched.betas[k]
    alpha = 1.0 - beta
    abar = sched.alpha_bars[k]
    mean = (x_k - (beta / math.sqrt(1.0 - abar)) * eps_hat) / math.sqrt(alpha)
    if z is None:
        if k > 0:
            raise ContractError("ddpm_step: noise z is required for k > 0")
        return mean.astype(x_k.dtype, copy=False)
    if k == 0 and np.any(z != 0):
        raise ContractError("ddpm_step: z must be all zeros at k == 0")
    return (mean + math.sqrt(beta) * z).astype(x_k.dtype, copy=False)


def sample(model: EpsModel, cond: np.ndarray, sched: NoiseSchedule,
           rng: np.random.Generator | Sequence[np.random.Generator],
           shape: tuple[int, int], noise_scale: float = 1.0) -> np.ndarray:
    """Ancestral sampling from ``x_K ~ N(0, I)`` down to a clipped ``x_0``.

    ``cond`` is [D_c] (returns [T_p, A]) or [B, D_c] (returns [B, T_p, A]).
    A sequence of generators gives each batch row its own noise stream, so a
    row's sample does not depend on which other rows share the batch.
    ``noise_scale=0`` zeroes both the initial draw and the injected noise.
    """
    single = cond.ndim == 1
    conds = cond[None] if single else cond
    B = conds.shape[0]
    rngs = [rng] * B if isinstance(rng, np.random.Generator) else list(rng)
    if len(rngs) != B:
        raise DimensionError(f"sample: {len(rngs)} generators for batch of {B}")
    dtype = conds.dtype

    def draw():
        if isinstance(rng, np.random.Generator):
            z = rng.standard_normal((B,) + tuple(shape))
        else:
            z = np.stack([r.standard_normal(tuple(shape)) for r in rngs])
        return (noise_scale * z).astype(dtype)

    x = draw()
    for k in range(sched.K - 1, -1, -1):
        eps_hat = model.forward(x, np.full(B, k), conds)
        z = draw() if k > 0 else np.zeros_like(x)
        x = ddpm_step(x, eps_hat, k, sched, z)
    x = np.clip(x, -1.0, 1.0)
    return x[0] if single else x

