"""Chunked on-disk episode archive.

Layout::

    <root>/manifest.json
    <root>/<array>/<chunk_index>.bin   raw little-endian values, row-major

Per-step arrays are chunked one episode per chunk along axis 0;
``episode_ends`` (i64, cumulative, last == N) is a single chunk.
"""
from __future__ import annotations

import json
import shutil
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1
DTYPES = {"f32": "<f4", "i64": "<i8"}
STEP_ARRAYS = ("images", "states", "actions", "rewards")


class StoreError(ValueError):
    pass


@dataclass
class DemoStore:
    root: Path
    arrays: dict[str, np.ndarray]
    meta: dict = field(default_factory=dict)

    @property
    def episode_ends(self) -> np.ndarray:
        return self.arrays["episode_ends"]

    @property
    def n_steps(self) -> int:
        return int(self.episode_ends[-1]) if len(self.episode_ends) else 0

    @property
    def n_episodes(self) -> int:
        return len(self.episode_ends)

    @property
    def images(self):
        return self.arrays.get("images")

    @property
    def states(self):
        return self.arrays["states"]

    @property
    def actions(self):
        return self.arrays["actions"]

    @property
    def rewards(self):
        return self.arrays["rewards"]

    def episode_starts(self) -> np.ndarray:
        return np.concatenate([[0], self.episode_ends[:-1]]).astype(np.int64)

    def episode_of(self, index) -> np.ndarray:
        return np.searchsorted(self.episode_ends, index, side="right")

    def validate(self) -> None:
        ends = self.episode_ends
        if ends.ndim != 1 or len(ends) == 0:
            raise StoreError("episode_ends must be a non-empty vector")
        if np.any(np.diff(ends) <= 0) or ends[0] <= 0:
            raise StoreError("episode_ends must be strictly increasing and positive")
        n = int(ends[-1])
        for name in STEP_ARRAYS:
            if name in self.arrays and self.arrays[name].shape[0] != n:
                raise StoreError(f"array {name!r} has {self.arrays[name].shape[0]} rows, expected N={n}")

    # ------------------------------------------------------------------ io

    def write(self, force: bool = False) -> None:
        self.validate()
        root = Path(self.root)
        if root.exists() and any(root.iterdir()):
            if not force:
                raise StoreError(f"{root} exists and is not empty (pass force to overwrite)")
            _remove_store(root)
        root.mkdir(parents=True, exist_ok=True)
        ends = [int(e) for e in self.episode_ends]
        entries = []
        for name, arr in self.arrays.items():
            dt = "i64" if name == "episode_ends" else "f32"
            a = np.ascontiguousarray(arr, dtype=DTYPES[dt])
            bounds = [len(a)] if name == "episode_ends" else ends
            d = root / name
            d.mkdir()
            lo = 0
            for i, hi in enumerate(bounds):
                (d / f"{i}.bin").write_bytes(a[lo:hi].tobytes())
                lo = hi
            entries.append({"name": name, "dtype": dt, "shape": list(a.shape), "chunk_boundaries": bounds})
        manifest = {"format_version": FORMAT_VERSION, "arrays": entries, **self.meta}
        (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    @classmethod
    def open(cls, root) -> "DemoStore":
        root = Path(root)
        mpath = root / "manifest.json"
        if not mpath.exists():
            raise StoreError(f"{root}: no manifest.json")
        manifest = json.loads(mpath.read_text())
        if manifest.get("format_version") != FORMAT_VERSION:
            raise StoreError(f"{root}: unsupported format_version {manifest.get('format_version')}")
        arrays = {}
        for entry in manifest["arrays"]:
            name, dt, shape = entry["name"], entry["dtype"], tuple(entry["shape"])
            parts = [np.fromfile(root / name / f"{i}.bin", dtype=DTYPES[dt])
                     for i in range(len(entry["chunk_boundaries"]))]
            flat = np.concatenate(parts) if parts else np.zeros(0, DTYPES[dt])
            if flat.size != int(np.prod(shape)):
                raise StoreError(f"{root}/{name}: {flat.size} values, manifest shape {shape}")
            arrays[name] = flat.reshape(shape).astype(np.int64 if dt == "i64" else np.float32)
        meta = {k: v for k, v in manifest.items() if k not in ("format_version", "arrays")}
        store = cls(root, arrays, meta)
        store.validate()
        return store


def _remove_store(root: Path) -> None:
    """Delete only what a previous store wrote: the manifest and its array dirs."""
    mpath = root / "manifest.json"
    names = list(STEP_ARRAYS) + ["episode_ends"]
    if mpath.exists():
        try:
            names += [e["name"] for e in json.loads(mpath.read_text()).get("arrays", [])]
        except (ValueError, KeyError):
            pass
        mpath.unlink()
    for name in set(names):
        if (root / name).is_dir():
            shutil.rmtree(root / name)
