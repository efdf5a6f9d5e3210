"""Training loop and batched closed-loop evaluation."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import AugmentConfig, DemoStore, MirrorRule, augment_batch, sample_batch
from .diffusion import DiffusionBatch, training_loss
from .envs import EnvConfig, make_env
from .nncore import OptimConfig, adamw_step, ema_update, make_rng
from .policy import (
    EpisodeResult,
    Normalizer,
    PolicyBundle,
    fit_normalizer,
    normalize,
    run_closed_loop_batch,
)

log = logging.getLogger(__name__)

EVAL_SEED_FLOOR = 2 ** 31


def fit_store_normalizers(store: DemoStore, rule: MirrorRule | None) -> tuple[Normalizer, Normalizer]:
    """Action and state normalizers; mirrored copies are included when flips are in play."""
    acts, states = store.actions, store.states
    if rule is not None:
        acts = np.concatenate([acts, rule.actions(acts)])
        states = np.concatenate([states, rule.states(states)])
    return fit_normalizer(acts), fit_normalizer(states)


def train_step(bundle: PolicyBundle, store: DemoStore, batch_size: int, optim: OptimConfig,
               rng: np.random.Generator, aug: AugmentConfig | None = None,
               rule: MirrorRule | None = None, lr: float | None = None) -> float:
    """Sample windows, take one AdamW step on the noise-prediction loss, update EMA."""
    h = bundle.cfg.horizons
    anchors = rng.integers(0, store.n_steps, size=batch_size)
    images, states, actions = sample_batch(store, anchors, h)
    if aug is not None and rule is not None:
        images, states, actions = augment_batch(images, states, actions, rng, aug, rule)
    dtype = bundle.params.dtype
    acts_n = np.clip(normalize(actions.astype(np.float64), bundle.action_norm), -1.0, 1.0).astype(dtype)
    cond = bundle.encode(images, states)
    batch = DiffusionBatch.draw(acts_n, cond, bundle.schedule, rng)
    bundle.params.zero_grad()
    loss, gcond = training_loss(bundle.denoiser, batch, bundle.schedule)
    bundle.encoder.backward(gcond)
    adamw_step(bundle.params, optim, lr=lr)
    if bundle.ema is not None:
        ema_update(bundle.ema, bundle.params)
    return loss


@dataclass
class EvalReport:
    results: list[EpisodeResult]
    seeds: list[int]

    @property
    def rewards(self) -> np.ndarray:
        return np.array([r.total_reward for r in self.results])

    @property
    def success_rate(self) -> float:
        return float(np.mean([r.success for r in self.results])) if self.results else 0.0

    @property
    def mean_reward(self) -> float:
        return float(self.rewards.mean()) if self.results else 0.0

    @property
    def max_reward(self) -> float:
        return float(self.rewards.max()) if self.results else 0.0

    @property
    def reward_std(self) -> float:
        return float(self.rewards.std()) if len(self.results) > 1 else 0.0

    @property
    def mean_steps(self) -> float:
        return float(np.mean([r.steps for r in self.results])) if self.results else 0.0


def evaluate(planner, env_cfg: EnvConfig, n_episodes: int, seed: int, horizons,
             max_steps: int | None = None, batch: int = 50) -> EvalReport:
    """Closed-loop rollouts; episode i runs on maze seed ``seed XOR i`` with sampler seed likewise."""
    max_steps = max_steps or env_cfg.max_steps
    results: list[EpisodeResult] = []
    seeds = [seed ^ i for i in range(n_episodes)]
    for lo in range(0, n_episodes, batch):
        idx = range(lo, min(n_episodes, lo + batch))
        envs = []
        for i in idx:
            env = make_env(env_cfg, seed)
            env.reset(i)
            envs.append(env)
        rngs = [make_rng((seed ^ i) + 0x9E3779B97F4A7C15) for i in idx]
        results += run_closed_loop_batch(envs, planner, horizons, max_steps, rngs)
    return EvalReport(results, seeds)


def train_loop(bundle: PolicyBundle, store: DemoStore, optim: OptimConfig, steps: int, batch_size: int,
               rng: np.random.Generator, aug: AugmentConfig | None = None, rule: MirrorRule | None = None,
               start_step: int = 0, log_every: int = 100,
               on_log: Callable[[int, float], None] | None = None) -> list[float]:
    """Run ``steps`` updates; ``on_log(global_step, mean_loss)`` fires every ``log_every``."""
    losses = []
    window = []
    t0 = time.time()
    for i in range(steps):
        loss = train_step(bundle, store, batch_size, optim, rng, aug, rule, lr=optim.lr_at(i))
        if not math.isfinite(loss):
            raise FloatingPointError(f"non-finite training loss at step {start_step + i + 1}")
        losses.append(loss)
        window.append(loss)
        step = start_step + i + 1
        if on_log is not None and (step % log_every == 0 or i == steps - 1):
            on_log(step, float(np.mean(window)))
            window = []
    log.debug("trained %d steps in %.1fs", steps, time.time() - t0)
    return losses
