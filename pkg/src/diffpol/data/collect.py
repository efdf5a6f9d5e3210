from __future__ import annotations

import logging
from pathlib import Path
from typing import Callable

import numpy as np

from ..envs import EnvConfig, MazeEnv, make_env
from .experts import PDGains, expert_action
from .store import DemoStore

log = logging.getLogger(__name__)


def run_expert_episode(env: MazeEnv, episode_index: int,
                       expert: Callable[[MazeEnv], np.ndarray]) -> dict:
    obs = env.reset(episode_index)
    images, states, actions, rewards = [], [], [], []
    while True:
        a = np.asarray(expert(env), dtype=np.float32)
        if obs.image is not None:
            images.append(obs.image)
        states.append(obs.state)
        actions.append(a)
        out = env.step(a)
        rewards.append(out.reward)
        obs = out.observation
        if out.done:
            break
    return {
        "images": np.stack(images) if images else None,
        "states": np.stack(states),
        "actions": np.stack(actions),
        "rewards": np.asarray(rewards, dtype=np.float32),
        "success": bool(out.success),
    }


def collect(env_cfg: EnvConfig, n_episodes: int, base_seed: int, out_dir,
            expert: Callable[[MazeEnv], np.ndarray] | None = None, force: bool = False,
            gains: PDGains = PDGains()) -> DemoStore:
    """Roll the expert for ``n_episodes`` (episode e uses seed base_seed XOR e) and write a store."""
    if n_episodes < 1:
        raise ValueError(f"n_episodes must be >= 1 (got {n_episodes})")
    expert = expert or (lambda env: expert_action(env, gains))
    env = make_env(env_cfg, base_seed)
    eps = [run_expert_episode(env, e, expert) for e in range(n_episodes)]
    lengths = [len(ep["actions"]) for ep in eps]
    arrays = {}
    if env_cfg.images:
        arrays["images"] = np.concatenate([ep["images"] for ep in eps])
    arrays["states"] = np.concatenate([ep["states"] for ep in eps])
    arrays["actions"] = np.concatenate([ep["actions"] for ep in eps])
    arrays["rewards"] = np.concatenate([ep["rewards"] for ep in eps])
    arrays["episode_ends"] = np.cumsum(lengths).astype(np.int64)
    successes = [ep["success"] for ep in eps]
    meta = {
        "env_config": env_cfg.to_dict(),
        "base_seed": int(base_seed),
        "episode_seeds": [int(base_seed ^ e) if env_cfg.drift.kind != "none" else int(base_seed)
                          for e in range(n_episodes)],
        "expert_success": successes,
        "created_by": "diffpol.data.collect",
    }
    store = DemoStore(Path(out_dir), arrays, meta)
    store.write(force=force)
    log.info("collected %d episodes, N=%d, expert success %.3f",
             n_episodes, store.n_steps, float(np.mean(successes)))
    return store
