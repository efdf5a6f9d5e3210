"""Encoder + denoiser + schedule + normalizers, saved as one checkpoint."""
from __future__ import annotations

import contextlib
from dataclasses import asdict, dataclass, field

import numpy as np

from ..data.windows import HorizonConfig
from ..diffusion import NoiseSchedule, make_schedule, sample
from ..nncore import (
    EmaState,
    ParamStore,
    StateError,
    load_checkpoint,
    make_rng,
    rng_state,
    save_checkpoint,
)
from .denoiser import DenoiserConfig, build_denoiser
from .encoder import EncoderConfig, ObservationEncoder
from .normalizer import Normalizer, denormalize, normalize


@dataclass
class ScheduleConfig:
    kind: str = "linear"
    K: int = 100
    beta_start: float = 1e-4
    beta_end: float = 0.02

    def build(self) -> NoiseSchedule:
        return make_schedule(self.K, self.kind, self.beta_start, self.beta_end)


@dataclass
class PolicyConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig)
    horizons: HorizonConfig = field(default_factory=HorizonConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyConfig":
        return cls(EncoderConfig(**d["encoder"]), DenoiserConfig(**d["denoiser"]),
                   HorizonConfig(**d["horizons"]), ScheduleConfig(**d["schedule"]))


def pad_history(history: list, T_o: int) -> list:
    """Last ``T_o`` observations, front-padded by repeating the oldest."""
    if not history:
        raise StateError("observation history is empty")
    recent = list(history[-T_o:])
    return [recent[0]] * (T_o - len(recent)) + recent


class PolicyBundle:
    def __init__(self, cfg: PolicyConfig, action_dim: int, state_dim: int | None,
                 image_shape: tuple[int, int, int] | None, action_norm: Normalizer,
                 state_norm: Normalizer | None = None, seed: int = 0, dtype=np.float32):
        self.cfg = cfg
        self.action_dim, self.state_dim, self.image_shape = action_dim, state_dim, image_shape
        self.action_norm, self.state_norm = action_norm, state_norm
        self.seed = seed
        self.schedule = cfg.schedule.build()
        rng = make_rng(seed)
        self.params = ParamStore(dtype=dtype)
        use_images = cfg.encoder.mode in ("visual", "hybrid")
        use_states = cfg.encoder.mode in ("state", "hybrid")
        self.encoder = ObservationEncoder(self.params, cfg.encoder, cfg.horizons.T_o, rng,
                                          image_shape=image_shape if use_images else None,
                                          state_dim=state_dim if use_states else None)
        self.denoiser = build_denoiser(self.params, cfg.denoiser, cfg.horizons.T_p, action_dim,
                                       self.encoder.out_dim, rng)
        self.ema: EmaState | None = None

    @property
    def uses_images(self) -> bool:
        return self.cfg.encoder.mode in ("visual", "hybrid")

    @property
    def uses_states(self) -> bool:
        return self.cfg.encoder.mode in ("state", "hybrid")

    def norm_states(self, states: np.ndarray) -> np.ndarray:
        if self.state_norm is None:
            return states.astype(self.params.dtype)
        return normalize(states, self.state_norm).astype(self.params.dtype)

    def encode(self, images: np.ndarray | None, states: np.ndarray | None) -> np.ndarray:
        """images [B,T_o,H,W,3], states [B,T_o,S] (raw) -> cond [B,D_c]."""
        imgs = images.astype(self.params.dtype) if (self.uses_images and images is not None) else None
        sts = self.norm_states(states) if (self.uses_states and states is not None) else None
        return self.encoder.forward(imgs, sts)

    def stack_histories(self, histories: list[list]) -> tuple[np.ndarray | None, np.ndarray]:
        T_o = self.cfg.horizons.T_o
        padded = [pad_history(h, T_o) for h in histories]
        states = np.stack([[o.state for o in h] for h in padded])
        images = None
        if self.uses_images:
            images = np.stack([[o.image for o in h] for h in padded])
        return images, states

    def plan_batch(self, histories: list[list], rngs, envs=None) -> np.ndarray:
        """Denormalized action plans [B, T_p, A]; one generator per history."""
        images, states = self.stack_histories(histories)
        cond = self.encode(images, states)
        h = self.cfg.horizons
        x = sample(self.denoiser, cond, self.schedule, list(rngs), (h.T_p, self.action_dim))
        return denormalize(x, self.action_norm).astype(np.float32)

    def plan(self, history: list, rng: np.random.Generator) -> np.ndarray:
        return self.plan_batch([history], [rng])[0]

    # ------------------------------------------------------------ weights

    def init_ema(self, decay: float) -> EmaState:
        self.ema = EmaState.from_params(self.params, decay)
        return self.ema

    @contextlib.contextmanager
    def ema_weights(self):
        """Temporarily swap the EMA shadow into the live parameters."""
        if self.ema is None:
            yield
            return
        saved = {k: p.value.copy() for k, p in self.params.items()}
        self.params.load_values(self.ema.shadow)
        try:
            yield
        finally:
            self.params.load_values(saved)

    def metadata(self) -> dict:
        return {
            "policy": self.cfg.to_dict(),
            "action_dim": self.action_dim,
            "state_dim": self.state_dim,
            "image_shape": list(self.image_shape) if self.image_shape else None,
            "action_norm": self.action_norm.to_dict(),
            "state_norm": self.state_norm.to_dict() if self.state_norm else None,
            "schedule": self.schedule.descriptor(),
            "init_seed": self.seed,
            "step_count": self.params.step_count,
            "ema_decay": self.ema.decay if self.ema else None,
        }

    def save(self, path, extra_meta: dict | None = None, rng: np.random.Generator | None = None) -> None:
        meta = self.metadata()
        if rng is not None:
            meta["rng_state"] = rng_state(rng)
        meta.update(extra_meta or {})
        tensors = {}
        for name, p in self.params.items():
            tensors[f"param/{name}"] = p.value
            tensors[f"adam_m/{name}"] = p.adam_m
            tensors[f"adam_v/{name}"] = p.adam_v
        if self.ema is not None:
            for name, v in self.ema.shadow.items():
                tensors[f"ema/{name}"] = v
        save_checkpoint(path, meta, tensors)

    @classmethod
    def load(cls, path, weights: str = "raw") -> tuple["PolicyBundle", dict]:
        """Rebuild a bundle. ``weights="ema"`` puts the EMA shadow in the live parameters."""
        meta, tensors = load_checkpoint(path)
        cfg = PolicyConfig.from_dict(meta["policy"])
        bundle = cls(cfg, meta["action_dim"], meta["state_dim"],
                     tuple(meta["image_shape"]) if meta["image_shape"] else None,
                     Normalizer.from_dict(meta["action_norm"]),
                     Normalizer.from_dict(meta["state_norm"]) if meta["state_norm"] else None,
                     seed=meta.get("init_seed", 0))
        for name, p in bundle.params.items():
            p.value[...] = tensors[f"param/{name}"]
            if f"adam_m/{name}" in tensors:
                p.adam_m[...] = tensors[f"adam_m/{name}"]
                p.adam_v[...] = tensors[f"adam_v/{name}"]
        bundle.params.step_count = int(meta.get("step_count", 0))
        if meta.get("ema_decay") is not None and any(k.startswith("ema/") for k in tensors):
            bundle.ema = EmaState({n: tensors[f"ema/{n}"].astype(bundle.params.dtype)
                                   for n in bundle.params.names()}, meta["ema_decay"])
        if weights == "ema" and bundle.ema is not None:
            bundle.params.load_values(bundle.ema.shadow)
        return bundle, meta
