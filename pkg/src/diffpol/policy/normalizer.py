from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEGENERATE_SPAN = 1e-8


class EmptyDatasetError(ValueError):
    pass


@dataclass
class Normalizer:
    """Per-dimension min/max affine map onto [-1, 1]."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        self.min = np.asarray(self.min, dtype=np.float64)
        self.max = np.asarray(self.max, dtype=np.float64)
        if self.min.shape != self.max.shape:
            raise ValueError("normalizer min/max shapes differ")
        if np.any(self.min > self.max):
            raise ValueError("normalizer requires min <= max elementwise")

    @property
    def degenerate(self) -> np.ndarray:
        return (self.max - self.min) < DEGENERATE_SPAN

    @property
    def dim(self) -> int:
        return int(self.min.shape[0])

    def to_dict(self) -> dict:
        return {"min": self.min.tolist(), "max": self.max.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Normalizer":
        return cls(np.array(d["min"]), np.array(d["max"]))


def fit_normalizer(values: np.ndarray) -> Normalizer:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] == 0:
        raise EmptyDatasetError(f"cannot fit a normalizer to {values.shape[0] if values.ndim else 0} rows")
    return Normalizer(values.min(axis=0), values.max(axis=0))


def normalize(a: np.ndarray, norm: Normalizer) -> np.ndarray:
    span = norm.max - norm.min
    deg = norm.degenerate
    safe = np.where(deg, 1.0, span)
    out = 2.0 * (np.asarray(a, dtype=np.float64) - norm.min) / safe - 1.0
    out = np.where(deg, 0.0, out)
    return out.astype(np.asarray(a).dtype if np.asarray(a).dtype.kind == "f" else np.float64)


def denormalize(a_n: np.ndarray, norm: Normalizer) -> np.ndarray:
    span = norm.max - norm.min
    out = (np.asarray(a_n, dtype=np.float64) + 1.0) * 0.5 * span + norm.min
    out = np.where(norm.degenerate, norm.min, out)
    return out.astype(np.asarray(a_n).dtype if np.asarray(a_n).dtype.kind == "f" else np.float64)
