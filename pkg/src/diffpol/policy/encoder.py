from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nncore import (
    Activation,
    ConfigError,
    Conv2d,
    GroupNorm,
    Linear,
    ParamStore,
    Sequential,
    conv_out_len,
)

MODES = ("state", "visual", "hybrid")


@dataclass
class EncoderConfig:
    mode: str = "state"
    conv_channels: list[int] = field(default_factory=lambda: [16, 32])
    depth: int = 2
    strides: list[int] = field(default_factory=lambda: [2])
    kernel: int = 3
    groupnorm_groups: int = 4
    embed_dim: int = 64
    state_hidden: int = 128
    activation: str = "relu"

    def channels_at(self, i: int) -> int:
        return int(self.conv_channels[min(i, len(self.conv_channels) - 1)])

    def stride_at(self, i: int) -> int:
        return int(self.strides[min(i, len(self.strides) - 1)])

    def validate(self) -> list[str]:
        errs = []
        if self.mode not in MODES:
            errs.append(f"encoder.mode must be one of {MODES} (got {self.mode!r})")
        if self.depth < 1:
            errs.append(f"encoder.depth must be >= 1 (got {self.depth})")
        if not self.conv_channels or any(int(c) < 1 for c in self.conv_channels):
            errs.append("encoder.conv_channels must be a non-empty list of positive ints")
        if not self.strides or any(int(s) < 1 for s in self.strides):
            errs.append("encoder.strides must be a non-empty list of positive ints")
        if self.groupnorm_groups < 1:
            errs.append("encoder.groupnorm_groups must be >= 1")
        elif self.conv_channels and self.mode != "state":
            for i in range(self.depth):
                if self.channels_at(i) % self.groupnorm_groups:
                    errs.append(f"encoder conv layer {i}: channels {self.channels_at(i)} not divisible "
                                f"by groupnorm_groups {self.groupnorm_groups}")
        if self.embed_dim < 1 or self.state_hidden < 1:
            errs.append("encoder.embed_dim and encoder.state_hidden must be >= 1")
        if self.kernel < 1:
            errs.append("encoder.kernel must be >= 1")
        return errs


class ObservationEncoder:
    """Maps a stacked observation history to the conditioning vector.

    frames: [B, T_o, H, W, C] in [0, 1]; states: [B, T_o, S].
    """

    def __init__(self, store: ParamStore, cfg: EncoderConfig, T_o: int, rng: np.random.Generator,
                 image_shape: tuple[int, int, int] | None = None, state_dim: int | None = None,
                 name: str = "encoder"):
        errs = cfg.validate()
        if errs:
            raise ConfigError("; ".join(errs))
        self.cfg, self.T_o = cfg, T_o
        self.image_shape, self.state_dim = image_shape, state_dim
        self.visual = self.state = self.fuse = None
        if cfg.mode in ("visual", "hybrid"):
            if image_shape is None:
                raise ConfigError(f"encoder mode {cfg.mode!r} needs image observations")
            H, W, C = image_shape
            layers = []
            c_in, h, w = T_o * C, H, W
            pad = cfg.kernel // 2
            for i in range(cfg.depth):
                c_out, s = cfg.channels_at(i), cfg.stride_at(i)
                layers += [Conv2d(store, f"{name}.conv{i}", c_in, c_out, cfg.kernel, rng, stride=s, padding=pad),
                           GroupNorm(store, f"{name}.gn{i}", c_out, cfg.groupnorm_groups),
                           Activation(cfg.activation)]
                h, w = conv_out_len(h, cfg.kernel, s, pad), conv_out_len(w, cfg.kernel, s, pad)
                if h < 1 or w < 1:
                    raise ConfigError(f"encoder conv layer {i} shrinks the image below 1 pixel")
                c_in = c_out
            self.visual = Sequential(*layers)
            self._feat_shape = (c_in, h, w)
            self.visual_proj = Linear(store, f"{name}.vproj", c_in * h * w, cfg.embed_dim, rng)
        if cfg.mode in ("state", "hybrid"):
            if not state_dim:
                raise ConfigError(f"encoder mode {cfg.mode!r} needs state observations")
            self.state = Sequential(
                Linear(store, f"{name}.state0", T_o * state_dim, cfg.state_hidden, rng),
                Activation(cfg.activation),
                Linear(store, f"{name}.state1", cfg.state_hidden, cfg.embed_dim, rng),
            )
        if cfg.mode == "hybrid":
            self.fuse_act = Activation(cfg.activation)
            self.fuse = Linear(store, f"{name}.fuse", 2 * cfg.embed_dim, cfg.embed_dim, rng)

    @property
    def out_dim(self) -> int:
        return self.cfg.embed_dim

    def forward(self, frames: np.ndarray | None, states: np.ndarray | None) -> np.ndarray:
        mode = self.cfg.mode
        if mode in ("visual", "hybrid") and frames is None:
            raise ConfigError(f"encoder mode {mode!r} called without frames")
        if mode in ("state", "hybrid") and states is None:
            raise ConfigError(f"encoder mode {mode!r} called without states")
        parts = []
        if self.visual is not None:
            B, T, H, W, C = frames.shape
            x = frames.transpose(0, 1, 4, 2, 3).reshape(B, T * C, H, W)
            f = self.visual.forward(x)
            parts.append(self.visual_proj.forward(f.reshape(B, -1)))
        if self.state is not None:
            B = states.shape[0]
            parts.append(self.state.forward(states.reshape(B, -1)))
        if self.fuse is None:
            return parts[0]
        return self.fuse.forward(self.fuse_act.forward(np.concatenate(parts, axis=1)))

    def backward(self, g: np.ndarray) -> None:
        D = self.cfg.embed_dim
        if self.fuse is not None:
            g = self.fuse_act.backward(self.fuse.backward(g))
            gv, gs = g[:, :D], g[:, D:]
        elif self.visual is not None:
            gv, gs = g, None
        else:
            gv, gs = None, g
        if self.visual is not None:
            gf = self.visual_proj.backward(gv)
            self.visual.backward(gf.reshape((gf.shape[0],) + self._feat_shape))
        if self.state is not None:
            self.state.backward(gs)
