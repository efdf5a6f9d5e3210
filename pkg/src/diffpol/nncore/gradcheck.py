from __future__ import annotations

from typing import Callable

import numpy as np

from .params import ParamStore, make_rng


class PrecisionError(TypeError):
    pass


def gradcheck(closure: Callable[[], float], params: ParamStore, probes: int = 16,
              h: float = 1e-5, rng: np.random.Generator | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``closure`` must run forward + backward and return the scalar loss,
    accumulating into ``params`` grads (they are zeroed before each call).
    Up to ``probes`` coordinates are drawn per parameter tensor. The error of
    a tensor is ``max|analytic - numeric|`` over its probed coordinates
    divided by the tensor's gradient scale ``max(|analytic|, |numeric|)``;
    tensors whose gradients are all below 1e-9 report the absolute error.
    """
    if not params.entries:
        return 0.0
    for name, p in params.items():
        if p.value.dtype != np.float64:
            raise PrecisionError(f"gradcheck requires float64 parameters; {name} is {p.value.dtype}")
    rng = rng if rng is not None else make_rng(0)

    params.zero_grad()
    closure()
    analytic = {k: p.grad.copy() for k, p in params.items()}

    worst = 0.0
    for name, p in params.items():
        flat = p.value.reshape(-1)
        n = flat.size
        idx = rng.choice(n, size=min(probes, n), replace=False)
        num = np.empty(len(idx))
        for j, i in enumerate(idx):
            orig = flat[i]
            flat[i] = orig + h
            params.zero_grad()
            f_plus = closure()
            flat[i] = orig - h
            params.zero_grad()
            f_minus = closure()
            flat[i] = orig
            num[j] = (f_plus - f_minus) / (2.0 * h)
        ana = analytic[name].reshape(-1)[idx]
        scale = max(np.abs(analytic[name]).max(), np.abs(num).max())
        diff = np.abs(ana - num).max()
        err = diff if scale < 1e-9 else diff / scale
        worst = max(worst, float(err))
    params.zero_grad()
    return worst
