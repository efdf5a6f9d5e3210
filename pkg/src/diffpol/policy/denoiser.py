"""Conditional noise predictors: a FiLM-modulated MLP and a 1D temporal U-Net.

Both map ``(noisy [B,T_p,A], k [B], cond [B,D_c]) -> eps_hat [B,T_p,A]`` and
expose ``backward(g) -> d cond`` after a forward pass.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..nncore import (
    Activation,
    ConfigError,
    Conv1d,
    DimensionError,
    FiLM,
    GroupNorm,
    Linear,
    ParamStore,
    sinusoidal_embed,
)

ARCHS = ("film_mlp", "unet1d")


@dataclass
class DenoiserConfig:
    arch: str = "film_mlp"
    hidden: list[int] = field(default_factory=lambda: [256, 256, 256])
    channels: list[int] = field(default_factory=lambda: [32, 64])
    timestep_embed_dim: int = 32
    groupnorm_groups: int = 8
    activation: str = "silu"

    def validate(self, T_p: int | None = None) -> list[str]:
        errs = []
        if self.arch not in ARCHS:
            errs.append(f"denoiser.arch must be one of {ARCHS} (got {self.arch!r})")
        if not self.hidden or any(int(h) < 1 for h in self.hidden):
            errs.append("denoiser.hidden must be a non-empty list of positive widths")
        if not self.channels or any(int(c) < 1 for c in self.channels):
            errs.append("denoiser.channels must be a non-empty list of positive channel counts")
        if self.timestep_embed_dim < 2 or self.timestep_embed_dim % 2:
            errs.append("denoiser.timestep_embed_dim must be a positive even integer")
        if self.arch == "unet1d" and T_p is not None:
            down = len(self.channels) - 1
            if T_p % (2 ** down):
                errs.append(f"unet1d with {down} down levels needs T_p divisible by {2 ** down} (T_p={T_p})")
        return errs


class TimeCond:
    """``[mlp(sin_embed(k)), cond]``, shared by every FiLM site."""

    def __init__(self, store, name, embed_dim, rng):
        self.dim = embed_dim
        self.lin = Linear(store, f"{name}.time", embed_dim, embed_dim, rng)
        self.act = Activation("silu")

    def forward(self, k, cond):
        t = sinusoidal_embed(np.asarray(k), self.dim, dtype=cond.dtype)
        if t.ndim == 1:
            t = np.broadcast_to(t, (cond.shape[0], self.dim))
        t = self.act.forward(self.lin.forward(t))
        return np.concatenate([t, cond], axis=1)

    def backward(self, g):
        self.lin.backward(self.act.backward(g[:, :self.dim]))
        return g[:, self.dim:]


class FilmMLPDenoiser:
    def __init__(self, store: ParamStore, cfg: DenoiserConfig, T_p: int, A: int, cond_dim: int,
                 rng: np.random.Generator, name: str = "denoiser"):
        self.T_p, self.A = T_p, A
        self.tc = TimeCond(store, name, cfg.timestep_embed_dim, rng)
        c_dim = cfg.timestep_embed_dim + cond_dim
        widths = [int(h) for h in cfg.hidden]
        self.lins, self.films, self.film_lins, self.acts, self.residual = [], [], [], [], []
        prev = T_p * A
        for i, w in enumerate(widths):
            self.lins.append(Linear(store, f"{name}.fc{i}", prev, w, rng))
            self.film_lins.append(Linear(store, f"{name}.film{i}", c_dim, 2 * w, rng))
            self.films.append(FiLM())
            self.acts.append(Activation(cfg.activation))
            self.residual.append(prev == w)
            prev = w
        self.out = Linear(store, f"{name}.out", prev, T_p * A, rng, zero_init=True)

    def forward(self, noisy, k, cond):
        B = noisy.shape[0]
        if noisy.shape[1:] != (self.T_p, self.A):
            raise DimensionError(f"denoiser expects actions [B,{self.T_p},{self.A}], got {noisy.shape}")
        if cond.shape[0] != B:
            raise DimensionError(f"cond batch {cond.shape[0]} != action batch {B}")
        c = self.tc.forward(k, cond)
        h = noisy.reshape(B, -1)
        for lin, fl, film, act, res in zip(self.lins, self.film_lins, self.films, self.acts, self.residual):
            gs = fl.forward(c)
            w = gs.shape[1] // 2
            z = act.forward(film.forward(lin.forward(h), gs[:, :w], gs[:, w:]))
            h = h + z if res else z
        return self.out.forward(h).reshape(noisy.shape)

    def backward(self, g):
        B = g.shape[0]
        gh = self.out.backward(g.reshape(B, -1))
        gc = None
        layers = zip(self.lins, self.film_lins, self.films, self.acts, self.residual)
        for lin, fl, film, act, res in reversed(list(layers)):
            gz = act.backward(gh)
            dpre, dgain, dshift = film.backward(gz)
            dc = fl.backward(np.concatenate([dgain, dshift], axis=1))
            gc = dc if gc is None else gc + dc
            gin = lin.backward(dpre)
            gh = gin + gh if res else gin
        return self.tc.backward(gc)


def _groups(channels: int, want: int) -> int:
    g = min(want, channels)
    while channels % g:
        g -= 1
    return g


class ResBlock1d:
    """conv-GN-act, FiLM, conv-GN-act, plus a (1x1-projected) residual path."""

    def __init__(self, store, name, c_in, c_out, c_dim, groups, act, rng):
        g = _groups(c_out, groups)
        self.conv1 = Conv1d(store, f"{name}.conv1", c_in, c_out, 3, rng, padding=1)
        self.gn1 = GroupNorm(store, f"{name}.gn1", c_out, g)
        self.act1 = Activation(act)
        self.film_lin = Linear(store, f"{name}.film", c_dim, 2 * c_out, rng)
        self.film = FiLM()
        self.conv2 = Conv1d(store, f"{name}.conv2", c_out, c_out, 3, rng, padding=1)
        self.gn2 = GroupNorm(store, f"{name}.gn2", c_out, g)
        self.act2 = Activation(act)
        self.skip = Conv1d(store, f"{name}.skip", c_in, c_out, 1, rng) if c_in != c_out else None

    def forward(self, x, c):
        h = self.act1.forward(self.gn1.forward(self.conv1.forward(x)))
        gs = self.film_lin.forward(c)
        w = gs.shape[1] // 2
        h = self.film.forward(h, gs[:, :w], gs[:, w:])
        h = self.act2.forward(self.gn2.forward(self.conv2.forward(h)))
        return h + (self.skip.forward(x) if self.skip else x)

    def backward(self, g):
        gh = self.conv2.backward(self.gn2.backward(self.act2.backward(g)))
        gh, dgain, dshift = self.film.backward(gh)
        gc = self.film_lin.backward(np.concatenate([dgain, dshift], axis=1))
        gx = self.conv1.backward(self.gn1.backward(self.act1.backward(gh)))
        gx = gx + (self.skip.backward(g) if self.skip else g)
        return gx, gc


class UNet1DDenoiser:
    """Temporal U-Net over the action sequence, channels = action dims."""

    def __init__(self, store: ParamStore, cfg: DenoiserConfig, T_p: int, A: int, cond_dim: int,
                 rng: np.random.Generator, name: str = "denoiser"):
        errs = cfg.validate(T_p)
        if errs:
            raise ConfigError("; ".join(errs))
        self.T_p, self.A = T_p, A
        self.tc = TimeCond(store, name, cfg.timestep_embed_dim, rng)
        c_dim = cfg.timestep_embed_dim + cond_dim
        ch = [int(c) for c in cfg.channels]
        gr, act = cfg.groupnorm_groups, cfg.activation
        self.down, self.downsample = [], []
        prev = A
        for i, c in enumerate(ch):
            self.down.append(ResBlock1d(store, f"{name}.down{i}", prev, c, c_dim, gr, act, rng))
            if i < len(ch) - 1:
                self.downsample.append(Conv1d(store, f"{name}.ds{i}", c, c, 3, rng, stride=2, padding=1))
            prev = c
        self.mid = ResBlock1d(store, f"{name}.mid", prev, prev, c_dim, gr, act, rng)
        self.up = []
        for i in reversed(range(len(ch) - 1)):
            self.up.append(ResBlock1d(store, f"{name}.up{i}", prev + ch[i], ch[i], c_dim, gr, act, rng))
            prev = ch[i]
        self.out = Conv1d(store, f"{name}.out", prev, A, 1, rng, zero_init=True)
        self.levels = len(ch)

    def forward(self, noisy, k, cond):
        if noisy.shape[1:] != (self.T_p, self.A):
            raise DimensionError(f"denoiser expects actions [B,{self.T_p},{self.A}], got {noisy.shape}")
        if cond.shape[0] != noisy.shape[0]:
            raise DimensionError(f"cond batch {cond.shape[0]} != action batch {noisy.shape[0]}")
        c = self.tc.forward(k, cond)
        h = noisy.transpose(0, 2, 1)
        skips = []
        for i, blk in enumerate(self.down):
            h = blk.forward(h, c)
            if i < self.levels - 1:
                skips.append(h)
                h = self.downsample[i].forward(h)
        h = self.mid.forward(h, c)
        self._split = []
        for blk in self.up:
            h = np.repeat(h, 2, axis=2)
            s = skips.pop()
            self._split.append(h.shape[1])
            h = blk.forward(np.concatenate([h, s], axis=1), c)
        return self.out.forward(h).transpose(0, 2, 1)

    def backward(self, g):
        gh = self.out.backward(g.transpose(0, 2, 1))
        gc = None
        gskips = []

        def acc(d):
            nonlocal gc
            gc = d if gc is None else gc + d

        for blk, n in zip(reversed(self.up), reversed(self._split)):
            gin, dc = blk.backward(gh)
            acc(dc)
            gskips.append(gin[:, n:])
            up = gin[:, :n]
            gh = up[:, :, 0::2] + up[:, :, 1::2]
        gh, dc = self.mid.backward(gh)
        acc(dc)
        for i in reversed(range(self.levels)):
            if i < self.levels - 1:
                gh = self.downsample[i].backward(gh) + gskips.pop()
            gh, dc = self.down[i].backward(gh)
            acc(dc)
        return self.tc.backward(gc)


def build_denoiser(store, cfg: DenoiserConfig, T_p: int, A: int, cond_dim: int, rng, name="denoiser"):
    if cfg.arch == "film_mlp":
        return FilmMLPDenoiser(store, cfg, T_p, A, cond_dim, rng, name)
    if cfg.arch == "unet1d":
        return UNet1DDenoiser(store, cfg, T_p, A, cond_dim, rng, name)
    raise ConfigError(f"unknown denoiser arch {cfg.arch!r}")
