from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class StateError(RuntimeError):
    pass


class NonFiniteError(ValueError):
    pass


def check_finite(arr: np.ndarray, what: str = "array") -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{what} contains NaN or Inf")
    return arr


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based Philox generator from an explicit 64-bit seed."""
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFF_FFFF_FFFF_FFFF))


def rng_state(rng: np.random.Generator) -> dict:
    """Generator state as plain JSON-friendly values (uint64 arrays become int lists)."""
    def plain(v):
        if isinstance(v, dict):
            return {k: plain(x) for k, x in v.items()}
        if isinstance(v, np.ndarray):
            return [int(x) for x in v]
        return v

    return plain(rng.bit_generator.state)


def rng_from_state(state: dict) -> np.random.Generator:
    st = dict(state)
    st["state"] = {k: np.array(v, dtype=np.uint64) for k, v in state["state"].items()}
    st["buffer"] = np.array(state["buffer"], dtype=np.uint64)
    bg = np.random.Philox()
    bg.state = st
    return np.random.Generator(bg)


@dataclass
class Param:
    value: np.ndarray
    grad: np.ndarray
    adam_m: np.ndarray
    adam_v: np.ndarray

    @classmethod
    def of(cls, value: np.ndarray) -> "Param":
        return cls(value, np.zeros_like(value), np.zeros_like(value), np.zeros_like(value))


@dataclass
class ParamStore:
    entries: dict[str, Param] = field(default_factory=dict)
    step_count: int = 0
    dtype: type = np.float32

    def add(self, name: str, value: np.ndarray) -> Param:
        if name in self.entries:
            raise KeyError(f"duplicate parameter name {name!r}")
        p = Param.of(np.ascontiguousarray(value, dtype=self.dtype))
        self.entries[name] = p
        return p

    def __getitem__(self, name: str) -> Param:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def items(self):
        return self.entries.items()

    def names(self) -> list[str]:
        return list(self.entries)

    def zero_grad(self) -> None:
        for p in self.entries.values():
            p.grad[...] = 0

    def num_values(self) -> int:
        return sum(p.value.size for p in self.entries.values())

    def astype(self, dtype) -> "ParamStore":
        """Convert every array in place; layer objects keep their Param references."""
        self.dtype = dtype
        for p in self.entries.values():
            p.value = p.value.astype(dtype)
            p.grad = p.grad.astype(dtype)
            p.adam_m = p.adam_m.astype(dtype)
            p.adam_v = p.adam_v.astype(dtype)
        return self

    def values(self) -> dict[str, np.ndarray]:
        return {k: p.value for k, p in self.entries.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        missing = set(self.entries) - set(values)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)}")
        for name, p in self.entries.items():
            v = values[name]
            if v.shape != p.value.shape:
                raise ValueError(f"{name}: shape {v.shape} != {p.value.shape}")
            p.value[...] = v

    def check(self) -> None:
        for name, p in self.entries.items():
            shapes = {p.value.shape, p.grad.shape, p.adam_m.shape, p.adam_v.shape}
            if len(shapes) != 1:
                raise StateError(f"{name}: value/grad/moment shapes disagree: {shapes}")


@dataclass
class EmaState:
    shadow: dict[str, np.ndarray]
    decay: float

    def __post_init__(self):
        if not 0.0 <= self.decay < 1.0:
            raise ValueError(f"EMA decay must lie in [0, 1), got {self.decay}")

    @classmethod
    def from_params(cls, params: ParamStore, decay: float) -> "EmaState":
        return cls({k: p.value.copy() for k, p in params.items()}, decay)


def ema_update(ema: EmaState, params: ParamStore) -> EmaState:
    if list(ema.shadow) != params.names():
        raise StateError("EMA shadow keys do not mirror the parameter store")
    lam = ema.decay
    for name, p in params.items():
        s = ema.shadow[name]
        if s.shape != p.value.shape:
            raise StateError(f"EMA shadow {name}: shape {s.shape} != {p.value.shape}")
        s *= lam
        s += (1.0 - lam) * p.value
    return ema


# ------------------------------------------------------------------ init

def kaiming_uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in) if fan_in > 0 else 0.0
    return rng.uniform(-bound, bound, size=shape)
