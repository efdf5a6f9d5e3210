"""Receding-horizon execution: plan T_p actions, run the first T_a, re-observe, replan."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from ..data.windows import HorizonConfig
from ..envs import MazeEnv


class Planner(Protocol):
    def plan_batch(self, histories: list[list], rngs: Sequence[np.random.Generator],
                   envs: Sequence[MazeEnv]) -> np.ndarray: ...


@dataclass
class EpisodeResult:
    total_reward: float
    steps: int
    success: bool
    replan_count: int


def run_closed_loop_batch(envs: Sequence[MazeEnv], planner: Planner, horizons: HorizonConfig,
                          max_steps: int, rngs: Sequence[np.random.Generator]) -> list[EpisodeResult]:
    """Drive already-reset envs in lockstep, planning for all active ones at once.

    Each env consumes its own generator, so an episode's outcome does not
    depend on the batch it shares.
    """
    n = len(envs)
    histories = [[env.observe()] for env in envs]
    reward = [0.0] * n
    steps = [0] * n
    replans = [0] * n
    success = [False] * n
    active = [i for i in range(n) if not envs[i].state.done]
    while active:
        plans = planner.plan_batch([histories[i] for i in active], [rngs[i] for i in active],
                                   [envs[i] for i in active])
        still = []
        for plan, i in zip(plans, active):
            replans[i] += 1
            done = False
            for j in range(min(horizons.T_a, len(plan))):
                out = envs[i].step(plan[j])
                steps[i] += 1
                reward[i] += out.reward
                histories[i].append(out.observation)
                del histories[i][:-max(horizons.T_o, 1)]
                if out.done:
                    success[i] = out.success
                    done = True
                    break
                if steps[i] >= max_steps:
                    done = True
                    break
            if not done:
                still.append(i)
        active = still
    return [EpisodeResult(reward[i], steps[i], success[i], replans[i]) for i in range(n)]


def run_closed_loop(env: MazeEnv, planner: Planner, horizons: HorizonConfig, max_steps: int,
                    rng: np.random.Generator) -> EpisodeResult:
    return run_closed_loop_batch([env], planner, horizons, max_steps, [rng])[0]
