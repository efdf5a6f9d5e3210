"""Experiment configuration: one YAML tree, validated in full before any work starts."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..data import AugmentConfig, HorizonConfig
from ..envs import DriftMode, EnvConfig
from ..nncore import OptimConfig
from ..policy import DenoiserConfig, EncoderConfig, PolicyConfig, ScheduleConfig
from ..diffusion import SCHEDULE_KINDS

TRAIN_SEED_LIMIT = 2 ** 31


class ValidationError(ValueError):
    """Raised with every violated constraint, one per line."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.errors))


@dataclass
class DataSection:
    episodes: int = 200
    seed: int = 1
    augment: AugmentConfig = field(default_factory=AugmentConfig)


@dataclass
class TrainSection:
    """Optimizer knobs plus loop settings. ``total_steps`` defaults to ``train_steps``."""

    optim: OptimConfig = field(default_factory=OptimConfig)
    batch_size: int = 64
    train_steps: int = 10_000
    ema_decay: float = 0.995
    eval_period: int = 0  # 0: evaluate only at the end
    eval_episodes: int = 50
    eval_seed: int = TRAIN_SEED_LIMIT
    seed: int = 0
    log_every: int = 100


@dataclass
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    data: DataSection = field(default_factory=DataSection)
    model: PolicyConfig = field(default_factory=PolicyConfig)
    train: TrainSection = field(default_factory=TrainSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self) -> list[str]:
        errs = self.env.validate()
        errs += self.data.augment.validate()
        if self.data.episodes < 1:
            errs.append(f"data.episodes must be >= 1 (got {self.data.episodes})")
        if not 0 <= self.data.seed < TRAIN_SEED_LIMIT:
            errs.append(f"data.seed must be in [0, 2^31) so it never overlaps evaluation seeds "
                        f"(got {self.data.seed})")
        m = self.model
        errs += m.encoder.validate()
        errs += m.denoiser.validate(m.horizons.T_p)
        errs += m.horizons.validate()
        s = m.schedule
        if s.kind not in SCHEDULE_KINDS:
            errs.append(f"model.schedule.kind must be one of {SCHEDULE_KINDS} (got {s.kind!r})")
        if s.K < 1:
            errs.append(f"model.schedule.K must be >= 1 (got {s.K})")
        if s.kind == "linear" and not 0 < s.beta_start <= s.beta_end < 1:
            errs.append(f"model.schedule needs 0 < beta_start <= beta_end < 1 "
                        f"(got {s.beta_start}, {s.beta_end})")
        if m.encoder.mode != "state" and not self.env.images:
            errs.append(f"model.encoder.mode {m.encoder.mode!r} needs env.images: true")
        t = self.train
        errs += t.optim.validate()
        if t.batch_size < 1:
            errs.append(f"train.batch_size must be >= 1 (got {t.batch_size})")
        if t.train_steps < 0:
            errs.append(f"train.train_steps must be >= 0 (got {t.train_steps})")
        if not 0 <= t.ema_decay < 1:
            errs.append(f"train.ema_decay must be in [0, 1) (got {t.ema_decay})")
        if t.eval_period < 0 or t.eval_episodes < 0:
            errs.append("train.eval_period and train.eval_episodes must be >= 0")
        if t.eval_seed < TRAIN_SEED_LIMIT:
            errs.append(f"train.eval_seed must be >= 2^31 (got {t.eval_seed})")
        if t.log_every < 1:
            errs.append(f"train.log_every must be >= 1 (got {t.log_every})")
        return errs


# ------------------------------------------------------------ parsing

def _kind_of(value):
    if isinstance(value, bool):
        return bool
    if isinstance(value, int):
        return int
    if isinstance(value, float):
        return float
    if isinstance(value, (list, tuple)):
        return list
    return type(value)


def _coerce(value, template, path: str, errs: list[str]):
    want = _kind_of(template)
    if want is float and isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if want is int and isinstance(value, int) and not isinstance(value, bool):
        return value
    if want is list and isinstance(value, list):
        inner = _kind_of(template[0]) if len(template) else None
        for i, v in enumerate(value):
            if inner in (int, float) and (isinstance(v, bool) or not isinstance(v, (int, float))):
                errs.append(f"{path}[{i}] must be a number (got {v!r})")
            elif inner is int and isinstance(v, float):
                errs.append(f"{path}[{i}] must be an integer (got {v!r})")
        return tuple(value) if isinstance(template, tuple) else list(value)
    if want in (bool, str) and isinstance(value, want):
        return value
    errs.append(f"{path} must be {want.__name__} (got {value!r})")
    return template


def _build(cls, raw, path: str, errs: list[str]):
    """Dataclass from a mapping; unknown keys and type mismatches go into ``errs``."""
    default = cls()
    if raw is None:
        return default
    if not isinstance(raw, dict):
        errs.append(f"{path} must be a mapping (got {raw!r})")
        return default
    names = {f.name: f for f in dataclasses.fields(cls)}
    for key in raw:
        if key not in names:
            errs.append(f"{path}.{key} is not a recognized key (expected one of {sorted(names)})")
    kwargs = {}
    for name in names:
        if name not in raw:
            continue
        tmpl = getattr(default, name)
        sub = f"{path}.{name}"
        if dataclasses.is_dataclass(tmpl):
            kwargs[name] = _build(type(tmpl), raw[name], sub, errs)
        else:
            kwargs[name] = _coerce(raw[name], tmpl, sub, errs)
    return dataclasses.replace(default, **kwargs)


def config_from_dict(raw: dict) -> ExperimentConfig:
    errs: list[str] = []
    if not isinstance(raw, dict):
        raise ValidationError(["top level must be a mapping with env/data/model/train sections"])
    cfg = _build(ExperimentConfig, raw, "config", errs)
    # the optimizer's cosine horizon follows the run length unless set explicitly
    if "total_steps" not in ((raw.get("train") or {}).get("optim") or {}):
        cfg.train.optim.total_steps = max(1, cfg.train.train_steps)
    if errs:
        raise ValidationError(errs)
    errs = cfg.validate()
    if errs:
        raise ValidationError(errs)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise ValidationError([f"{path}: not valid YAML ({exc})"]) from exc
    except OSError as exc:
        raise ValidationError([f"{path}: cannot read config ({exc.strerror})"]) from exc
    return config_from_dict(raw or {})


def dump_config(cfg: ExperimentConfig) -> str:
    def plain(v):
        if isinstance(v, dict):
            return {k: plain(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [plain(x) for x in v]
        return v

    return yaml.safe_dump(plain(cfg.to_dict()), sort_keys=False)


__all__ = [
    "DataSection",
    "DriftMode",
    "EncoderConfig",
    "DenoiserConfig",
    "ExperimentConfig",
    "HorizonConfig",
    "ScheduleConfig",
    "TrainSection",
    "ValidationError",
    "config_from_dict",
    "dump_config",
    "load_config",
]
