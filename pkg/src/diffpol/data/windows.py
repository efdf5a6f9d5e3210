from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .store import DemoStore


@dataclass(frozen=True)
class HorizonConfig:
    T_o: int = 2
    T_p: int = 8
    T_a: int = 1

    def validate(self) -> list[str]:
        errs = []
        if self.T_o < 1:
            errs.append(f"horizons.T_o must be >= 1 (got {self.T_o})")
        if self.T_p < 1:
            errs.append(f"horizons.T_p must be >= 1 (got {self.T_p})")
        if not 1 <= self.T_a <= self.T_p:
            errs.append(f"horizons.T_a must satisfy 1 <= T_a <= T_p (got T_a={self.T_a}, T_p={self.T_p})")
        return errs


@dataclass
class WindowSample:
    images: np.ndarray | None  # [T_o, H, W, 3]
    states: np.ndarray  # [T_o, S]
    actions: np.ndarray  # [T_p, A]
    episode: int
    anchor: int


def window_indices(store: DemoStore, anchors, horizons: HorizonConfig):
    """Row indices for observation and action windows at each anchor.

    Observation rows run ``t-T_o+1 .. t`` clamped to the episode's first
    step; action rows run ``t .. t+T_p-1`` clamped to its last step.
    """
    anchors = np.atleast_1d(np.asarray(anchors, dtype=np.int64))
    n = store.n_steps
    if np.any(anchors < 0) or np.any(anchors >= n):
        raise IndexError(f"anchor outside [0, {n})")
    ep = store.episode_of(anchors)
    starts = store.episode_starts()[ep]
    ends = store.episode_ends[ep]
    obs = anchors[:, None] + np.arange(-horizons.T_o + 1, 1)
    obs = np.maximum(obs, starts[:, None])
    act = anchors[:, None] + np.arange(horizons.T_p)
    act = np.minimum(act, ends[:, None] - 1)
    return obs, act, ep


def sample_window(store: DemoStore, anchor: int, horizons: HorizonConfig) -> WindowSample:
    obs, act, ep = window_indices(store, [anchor], horizons)
    imgs = store.images[obs[0]] if store.images is not None else None
    return WindowSample(imgs, store.states[obs[0]], store.actions[act[0]], int(ep[0]), int(anchor))


def sample_batch(store: DemoStore, anchors, horizons: HorizonConfig):
    """Vectorized windows: (images [B,T_o,H,W,3] | None, states [B,T_o,S], actions [B,T_p,A])."""
    obs, act, _ = window_indices(store, anchors, horizons)
    imgs = store.images[obs] if store.images is not None else None
    return imgs, store.states[obs], store.actions[act]
