from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .params import ParamStore, StateError


@dataclass
class OptimConfig:
    learning_rate: float = 1e-4
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 1e-6
    lr_schedule: str = "cosine"  # "constant" | "cosine" (cosine-with-warmup)
    warmup_steps: int = 500
    total_steps: int = 10_000

    def validate(self) -> list[str]:
        errs = []
        if not self.learning_rate > 0:
            errs.append(f"optim.learning_rate must be > 0 (got {self.learning_rate})")
        if len(self.betas) != 2 or not all(0.0 <= b < 1.0 for b in self.betas):
            errs.append(f"optim.betas must be two values in [0, 1) (got {self.betas})")
        if not self.eps > 0:
            errs.append(f"optim.eps must be > 0 (got {self.eps})")
        if self.weight_decay < 0:
            errs.append(f"optim.weight_decay must be >= 0 (got {self.weight_decay})")
        if self.lr_schedule not in ("constant", "cosine"):
            errs.append(f"optim.lr_schedule must be 'constant' or 'cosine' (got {self.lr_schedule!r})")
        if self.warmup_steps < 0 or self.total_steps < 1:
            errs.append("optim.warmup_steps must be >= 0 and optim.total_steps >= 1")
        elif self.warmup_steps > self.total_steps:
            errs.append(f"optim.warmup_steps ({self.warmup_steps}) must be <= optim.total_steps ({self.total_steps})")
        return errs

    def lr_at(self, step: int) -> float:
        """Learning rate for the update with 0-based index ``step``."""
        if self.lr_schedule == "constant":
            return self.learning_rate
        if step < self.warmup_steps:
            return self.learning_rate * (step + 1) / self.warmup_steps
        span = max(1, self.total_steps - self.warmup_steps)
        progress = min(1.0, (step - self.warmup_steps) / span)
        return self.learning_rate * 0.5 * (1.0 + math.cos(math.pi * progress))


def adamw_step(params: ParamStore, cfg: OptimConfig, lr: float | None = None) -> ParamStore:
    """One bias-corrected Adam update with decoupled weight decay.

    Decay multiplies the value by ``1 - lr*weight_decay`` before the Adam
    delta is subtracted. Gradients are left untouched.
    """
    if lr is None:
        lr = cfg.lr_at(params.step_count)
    b1, b2 = cfg.betas
    t = params.step_count + 1
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in params.items():
        if p.grad is None or p.grad.shape != p.value.shape:
            raise StateError(f"parameter {name!r} has no gradient of matching shape")
        g = p.grad
        p.adam_m *= b1
        p.adam_m += (1.0 - b1) * g
        p.adam_v *= b2
        p.adam_v += (1.0 - b2) * np.square(g)
        if cfg.weight_decay:
            p.value *= 1.0 - lr * cfg.weight_decay
        p.value -= lr * (p.adam_m / c1) / (np.sqrt(p.adam_v / c2) + cfg.eps)
    params.step_count = t
    return params
