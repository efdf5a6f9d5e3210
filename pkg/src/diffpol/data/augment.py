"""Left-right mirroring and pixel shifts applied consistently across a window."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..nncore import ConfigError
from .windows import WindowSample


@dataclass
class AugmentConfig:
    flip_prob: float = 0.0
    shift_max: int = 0

    def validate(self) -> list[str]:
        errs = []
        if not 0.0 <= self.flip_prob <= 1.0:
            errs.append(f"data.augment.flip_prob must be in [0, 1] (got {self.flip_prob})")
        if self.shift_max < 0:
            errs.append(f"data.augment.shift_max must be >= 0 (got {self.shift_max})")
        return errs


@dataclass(frozen=True)
class MirrorRule:
    """How a left-right mirror acts on state and action vectors.

    ``reflect`` state indices map ``v -> extent - v``; ``negate`` map
    ``v -> -v``; ``action_negate`` indices are negated and ``action_swap``
    index pairs are exchanged (one-hot left/right).
    """

    extent: float
    reflect: tuple[int, ...] = ()
    negate: tuple[int, ...] = ()
    action_negate: tuple[int, ...] = ()
    action_swap: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    @classmethod
    def for_env(cls, kind: str, width: int) -> "MirrorRule":
        if kind == "point":
            # state [x, y, vx, vy, gx, gy]; action [fx, fy]
            return cls(float(width), reflect=(0, 4), negate=(2,), action_negate=(0,))
        if kind == "grid":
            # state [row, col, goal_row, goal_col]; action one-hot [up, down, left, right]
            return cls(float(width - 1), reflect=(1, 3), action_swap=((2, 3),))
        raise ConfigError(f"no mirror rule for env kind {kind!r}")

    def states(self, s: np.ndarray) -> np.ndarray:
        s = s.copy()
        for i in self.reflect:
            s[..., i] = self.extent - s[..., i]
        for i in self.negate:
            s[..., i] = -s[..., i]
        return s

    def actions(self, a: np.ndarray) -> np.ndarray:
        a = a.copy()
        for i in self.action_negate:
            a[..., i] = -a[..., i]
        for i, j in self.action_swap:
            a[..., [i, j]] = a[..., [j, i]]
        return a


def flip(sample: WindowSample, rule: MirrorRule) -> WindowSample:
    imgs = None if sample.images is None else np.ascontiguousarray(sample.images[:, :, ::-1, :])
    return replace(sample, images=imgs, states=rule.states(sample.states), actions=rule.actions(sample.actions))


def shift_frames(images: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Translate every frame by (dy, dx) pixels with edge replication. images: [..., H, W, C]."""
    H, W = images.shape[-3], images.shape[-2]
    rows = np.clip(np.arange(H) - dy, 0, H - 1)
    cols = np.clip(np.arange(W) - dx, 0, W - 1)
    return images[..., rows, :, :][..., cols, :]


def augment(sample: WindowSample, rng: np.random.Generator, cfg: AugmentConfig,
            rule: MirrorRule) -> WindowSample:
    if sample.images is not None and cfg.shift_max >= sample.images.shape[-2]:
        raise ConfigError(f"shift_max {cfg.shift_max} must be below the image width {sample.images.shape[-2]}")
    out = sample
    if cfg.flip_prob > 0 and rng.random() < cfg.flip_prob:
        out = flip(out, rule)
    if cfg.shift_max > 0 and out.images is not None:
        dy, dx = rng.integers(-cfg.shift_max, cfg.shift_max + 1, size=2)
        out = replace(out, images=shift_frames(out.images, int(dy), int(dx)))
    return out


def augment_batch(images, states, actions, rng: np.random.Generator, cfg: AugmentConfig, rule: MirrorRule):
    """Batched :func:`augment`: one flip decision and shift per window."""
    B = states.shape[0]
    if images is not None and cfg.shift_max >= images.shape[-2]:
        raise ConfigError(f"shift_max {cfg.shift_max} must be below the image width {images.shape[-2]}")
    if cfg.flip_prob > 0:
        m = rng.random(B) < cfg.flip_prob
        if m.any():
            states = states.copy()
            actions = actions.copy()
            states[m] = rule.states(states[m])
            actions[m] = rule.actions(actions[m])
            if images is not None:
                images = images.copy()
                images[m] = images[m][:, :, :, ::-1, :]
    if cfg.shift_max > 0 and images is not None:
        shifts = rng.integers(-cfg.shift_max, cfg.shift_max + 1, size=(B, 2))
        images = np.stack([shift_frames(images[b], int(dy), int(dx)) for b, (dy, dx) in enumerate(shifts)])
    return images, states, actions
