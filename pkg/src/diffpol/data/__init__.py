"""Experts, demonstration storage, window sampling and augmentation."""
from .augment import AugmentConfig, MirrorRule, augment, augment_batch, flip, shift_frames
from .collect import collect, run_expert_episode
from .experts import (
    ExpertError,
    ExpertPlanner,
    PDGains,
    expert_action,
    expert_grid,
    expert_point,
    one_hot,
    path_to_moves,
    point_waypoint,
    rollout_grid,
)
from .store import DemoStore, StoreError
from .windows import HorizonConfig, WindowSample, sample_batch, sample_window, window_indices
