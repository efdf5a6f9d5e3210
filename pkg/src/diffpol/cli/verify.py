"""Property suite behind ``diffpol verify``.

Each check returns a measured value and a threshold; the report lists both so
a failure shows how far off it was, not just that it failed.
"""
from __future__ import annotations

import hashlib
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from ..data import DemoStore, HorizonConfig, collect, sample_window
from ..diffusion import add_noise, make_schedule, schedule_from_betas
from ..envs import EnvConfig, bfs_path, generate_maze
from ..nncore import EmaState, ParamStore, ema_update, gradcheck, layers, make_rng
from ..policy import DenoiserConfig, build_denoiser, denormalize, fit_normalizer, normalize

LAYER_KINDS = ("linear", "conv1d", "conv2d", "group_norm", "relu", "silu", "film")
DENOISER_ARCHS = ("film_mlp", "unet1d")
GRADCHECK_TOL = 1e-5


@dataclass
class CheckResult:
    name: str
    measured: float
    threshold: float
    passed: bool
    op: str = "<="

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<36} measured={self.measured:.6g}  threshold {self.op} {self.threshold:.6g}"


def _le(name, measured, threshold) -> CheckResult:
    return CheckResult(name, float(measured), float(threshold), bool(measured <= threshold), "<=")


# ------------------------------------------------------------ gradient fixtures

class _Wrap:
    def __init__(self, fwd, bwd):
        self.forward, self.backward = fwd, bwd


def layer_gradcheck(kind: str, seed: int, probes: int = 12) -> float:
    """Gradcheck one tiny layer in f64, input gradient included."""
    rng = make_rng(1000 + seed)
    store = ParamStore(dtype=np.float64)
    if kind == "linear":
        lay = layers.Linear(store, "l", 4, 2, rng)
        x = rng.standard_normal((3, 4))
    elif kind == "conv1d":
        lay = layers.Conv1d(store, "c", 3, 4, 3, rng, stride=int(rng.integers(1, 3)), padding=1)
        x = rng.standard_normal((2, 3, 7))
    elif kind == "conv2d":
        lay = layers.Conv2d(store, "c", 2, 3, 3, rng, stride=int(rng.integers(1, 3)), padding=1)
        x = rng.standard_normal((2, 2, 5, 6))
    elif kind == "group_norm":
        lay = layers.GroupNorm(store, "g", 6, 3)
        store["g.gain"].value[...] = rng.standard_normal(6)
        store["g.shift"].value[...] = rng.standard_normal(6)
        x = rng.standard_normal((2, 6, 5))
    elif kind in ("relu", "silu"):
        lay = layers.Activation(kind)
        x = rng.standard_normal((3, 5))
        if kind == "relu":  # keep probes away from the kink
            x = np.where(np.abs(x) < 0.05, 0.5, x)
    elif kind == "film":
        film = layers.FiLM()
        gain = store.add("gain", rng.standard_normal((2, 3)))
        shift = store.add("shift", rng.standard_normal((2, 3)))

        def bwd(g):
            dh, dg, ds = film.backward(g)
            gain.grad += dg
            shift.grad += ds
            return dh

        lay = _Wrap(lambda h: film.forward(h, gain.value, shift.value), bwd)
        x = rng.standard_normal((2, 3, 4))
    else:
        raise ValueError(f"unknown layer kind {kind!r}")
    inp = store.add("input", x)
    probe = rng.standard_normal(lay.forward(inp.value).shape)

    def closure():
        out = lay.forward(inp.value)
        inp.grad += lay.backward(probe)
        return float(np.sum(out * probe))

    return gradcheck(closure, store, probes=probes, h=1e-5, rng=rng)


def denoiser_gradcheck(arch: str, seed: int, probes: int = 12) -> float:
    """Gradcheck a tiny denoiser in f64 through its parameters and the conditioning input."""
    rng = make_rng(2000 + seed)
    store = ParamStore(dtype=np.float64)
    cfg = DenoiserConfig(arch=arch, hidden=[6, 6], channels=[4, 8], timestep_embed_dim=4,
                         groupnorm_groups=2, activation="silu")
    B, T_p, A, D = 2, 4, 2, 3
    net = build_denoiser(store, cfg, T_p, A, D, rng)
    for _, p in store.items():  # zero-init output layers would hide upstream gradients
        p.value[...] = rng.standard_normal(p.value.shape) * 0.5
    cond = store.add("cond", rng.standard_normal((B, D)))
    noisy = rng.standard_normal((B, T_p, A))
    k = rng.integers(0, 10, size=B)
    probe = rng.standard_normal((B, T_p, A))

    def closure():
        out = net.forward(noisy, k, cond.value)
        cond.grad += net.backward(probe)
        return float(np.sum(out * probe))

    return gradcheck(closure, store, probes=probes, h=1e-5, rng=rng)


# ------------------------------------------------------------ checks

def check_gradients(seeds: int = 3) -> list[CheckResult]:
    out = [_le(f"gradcheck/{k}", max(layer_gradcheck(k, s) for s in range(seeds)), GRADCHECK_TOL)
           for k in LAYER_KINDS]
    out += [_le(f"gradcheck/denoiser_{a}", max(denoiser_gradcheck(a, s) for s in range(seeds)), GRADCHECK_TOL)
            for a in DENOISER_ARCHS]
    return out


def check_schedules() -> list[CheckResult]:
    out = []
    for kind in ("linear", "cosine"):
        for K in (1, 10, 100, 1000):
            s = make_schedule(K, kind)
            bad = int(np.sum(np.diff(s.alpha_bars) >= 0))
            bad += int(np.sum((s.betas <= 0) | (s.betas >= 1)))
            if kind == "linear":
                bad += int(s.betas[0] != 1e-4) + int(K > 1 and s.betas[-1] != 0.02)
            out.append(_le(f"schedule/{kind}/K={K}/violations", bad, 0))
    return out


def check_noise_variance(n: int = 10_000) -> CheckResult:
    s = schedule_from_betas([0.5, 0.5])  # abar_1 = 0.25
    eps = make_rng(3).standard_normal(n)
    v = add_noise(np.zeros(n), eps, 1, s).var()
    return _le("add_noise/variance_rel_err", abs(v - 0.75) / 0.75, 0.03)


def check_normalizer(n: int = 10_000, dim: int = 5) -> CheckResult:
    rng = make_rng(17)
    data = rng.uniform(-50, 50, (n, dim)) * rng.uniform(0.01, 10, dim)
    data[:, 2] = 3.25  # degenerate constant dimension
    norm = fit_normalizer(data)
    err = np.max(np.abs(denormalize(normalize(data, norm), norm) - data))
    return _le("normalizer/round_trip_abs_err", err, 1e-6)


def check_ema() -> CheckResult:
    store = ParamStore(dtype=np.float64)
    store.add("w", np.ones(1))
    ema = EmaState({"w": np.zeros(1)}, 0.75)
    for _ in range(10):
        ema_update(ema, store)
    return _le("ema/closed_form_abs_err", abs(ema.shadow["w"][0] - (1 - 0.75 ** 10)), 1e-9)


def check_mazes(n_seeds: int = 1000, sizes=(5, 9, 15)) -> list[CheckResult]:
    out = []
    for size in sizes:
        solved = 0
        for seed in range(n_seeds):
            m = generate_maze(seed, size, size)
            solved += bfs_path(m.walls, m.start, m.goal) is not None
        again = all(generate_maze(s, size, size) == generate_maze(s, size, size) for s in range(20))
        out.append(CheckResult(f"maze/{size}x{size}/solvable_fraction", solved / n_seeds, 1.0,
                               solved == n_seeds and again, ">="))
    return out


def check_windows(trials: int = 300) -> CheckResult:
    rng = make_rng(23)
    violations = 0
    for _ in range(trials):
        lengths = rng.integers(1, 12, size=int(rng.integers(1, 6)))
        n = int(lengths.sum())
        ends = np.cumsum(lengths)
        idx = np.arange(n, dtype=np.float32)[:, None]
        store = DemoStore(None, {"states": idx, "actions": idx, "rewards": np.zeros(n, np.float32),
                                 "episode_ends": ends.astype(np.int64)}, {})
        h = HorizonConfig(T_o=int(rng.integers(1, 4)), T_p=int(rng.integers(1, 7)), T_a=1)
        t = int(rng.integers(0, n))
        e = int(np.searchsorted(ends, t, side="right"))
        start = 0 if e == 0 else int(ends[e - 1])
        w = sample_window(store, t, h)
        want_obs = np.clip(np.arange(t - h.T_o + 1, t + 1), start, None)
        want_act = np.clip(np.arange(t, t + h.T_p), None, ends[e] - 1)
        violations += not (np.array_equal(w.states[:, 0], want_obs) and np.array_equal(w.actions[:, 0], want_act))
    return _le("windows/padding_violations", violations, 0)


def _tree_hash(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def check_determinism() -> list[CheckResult]:
    from ..nncore import OptimConfig
    from ..policy import EncoderConfig, PolicyBundle, PolicyConfig
    from ..train import fit_store_normalizers, train_loop

    cfg = EnvConfig(kind="grid", width=5, height=5, resolution=5)
    hashes, losses = [], []
    with tempfile.TemporaryDirectory() as tmp:
        for run in range(2):
            store = collect(cfg, 3, 11, Path(tmp) / f"run{run}")
            hashes.append(_tree_hash(Path(tmp) / f"run{run}"))
            an, sn = fit_store_normalizers(store, None)
            pc = PolicyConfig(encoder=EncoderConfig(mode="hybrid", conv_channels=[4], depth=1, groupnorm_groups=2,
                                                    embed_dim=8, state_hidden=8),
                              denoiser=DenoiserConfig(hidden=[16], timestep_embed_dim=4))
            pc.schedule.K = 10
            b = PolicyBundle(pc, 4, 4, (5, 5, 3), an, sn, seed=3)
            b.init_ema(0.9)
            losses.append(train_loop(b, store, OptimConfig(warmup_steps=2, total_steps=10), 10, 8, make_rng(5)))
    return [CheckResult("determinism/store_hash_mismatch", float(hashes[0] != hashes[1]), 0.0, hashes[0] == hashes[1]),
            CheckResult("determinism/train_loss_mismatch", float(losses[0] != losses[1]), 0.0, losses[0] == losses[1])]


CHECKS: list[tuple[str, Callable[[], CheckResult | list[CheckResult]]]] = [
    ("gradients", check_gradients),
    ("schedules", check_schedules),
    ("noise", check_noise_variance),
    ("normalizer", check_normalizer),
    ("ema", check_ema),
    ("mazes", check_mazes),
    ("windows", check_windows),
    ("determinism", check_determinism),
]


def run_checks(emit: Callable[[str], None] = print) -> list[CheckResult]:
    results = []
    for group, fn in CHECKS:
        t0 = time.time()
        try:
            got = fn()
        except Exception as exc:  # a crash inside a check is a failed check, not an aborted run
            got = CheckResult(f"{group}/raised {type(exc).__name__}: {exc}", float("nan"), 0.0, False)
        for r in got if isinstance(got, list) else [got]:
            emit(r.line())
            results.append(r)
        emit(f"      ({group}: {time.time() - t0:.1f}s)")
    return results
