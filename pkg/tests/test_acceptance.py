"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The end-to-end imitation criteria train real policies through the CLI and take
several minutes each on one CPU; they are marked ``slow`` but run by default.
"""
import hashlib
import re
import time
from pathlib import Path

import numpy as np
import pytest
import yaml

from diffpol.cli.main import main
from diffpol.cli.verify import DENOISER_ARCHS, LAYER_KINDS, denoiser_gradcheck, layer_gradcheck
from diffpol.data import ExpertPlanner, HorizonConfig
from diffpol.diffusion import DiffusionBatch, add_noise, make_schedule, sample, schedule_from_betas, training_loss
from diffpol.envs import DriftMode, EnvConfig, GridState, bfs_path, generate_maze, make_env, maze_from_ascii
from diffpol.nncore import EmaState, OptimConfig, ParamStore, adamw_step, ema_update, make_rng
from diffpol.nncore import functional as F
from diffpol.nncore.params import kaiming_uniform
from diffpol.policy import DenoiserConfig, PolicyBundle, build_denoiser, denormalize, fit_normalizer, normalize, run_closed_loop

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
EVAL_SEED = 2 ** 31


def _hash_tree(root: Path) -> str:
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(p.relative_to(root).as_posix().encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def _derived_config(src: Path, dst: Path, optim=None, **train) -> str:
    cfg = yaml.safe_load(src.read_text())
    cfg["train"].update(train)
    cfg["train"]["optim"].update(optim or {})
    dst.write_text(yaml.safe_dump(cfg))
    return str(dst)


def _randomize_outputs(src: Path, dst: Path, seed: int = 0) -> Path:
    """Untrained checkpoint with its zero-initialized output layers redrawn, so every weight is random."""
    bundle, meta = PolicyBundle.load(src)
    rng = make_rng(seed)
    for name, p in bundle.params.items():
        if name.endswith(".out.weight"):
            p.value[...] = kaiming_uniform(rng, p.value.shape, int(np.prod(p.value.shape[1:])))
    bundle.init_ema(meta["ema_decay"])
    bundle.save(dst)
    return dst


def _eval_rate(capsys, config, checkpoint, episodes=50, seed=EVAL_SEED) -> float:
    capsys.readouterr()
    code = main(["eval", "--config", str(config), "--checkpoint", str(checkpoint),
                 "--episodes", str(episodes), "--seed", str(seed)])
    assert code == 0
    return float(re.search(r"success_rate=([0-9.]+)", capsys.readouterr().out).group(1))


# ------------------------------------------------------------ 1

def test_c01_gradient_correctness(acceptance, monkeypatch):
    t0 = time.time()
    errs = {k: max(layer_gradcheck(k, s) for s in range(3)) for k in LAYER_KINDS}
    errs.update({f"denoiser_{a}": max(denoiser_gradcheck(a, s) for s in range(3)) for a in DENOISER_ARCHS})
    worst = max(errs.values())

    orig = F.conv2d_backward

    def flipped(cache, g):
        dx, dk, db = orig(cache, g)
        return dx, dk, -db

    monkeypatch.setattr(F, "conv2d_backward", flipped)
    mutated = layer_gradcheck("conv2d", 0)
    monkeypatch.undo()
    elapsed = time.time() - t0
    ok = worst <= 1e-5 and mutated > 1e-2 and elapsed < 120
    acceptance(1, "gradient correctness",
               ok, f"max err {worst:.2e} (<=1e-5), mutation err {mutated:.2e} (>1e-2), {elapsed:.1f}s (<120s)")
    assert ok


# ------------------------------------------------------------ 2

def test_c02_scheduler_invariants(acceptance):
    t0 = time.time()
    bad = []
    for kind in ("linear", "cosine"):
        for K in (1, 10, 100, 1000):
            s = make_schedule(K, kind)
            if not np.all(np.diff(s.alpha_bars) < 0):
                bad.append(f"{kind}/{K} abar not decreasing")
            if not np.all((s.betas > 0) & (s.betas < 1)):
                bad.append(f"{kind}/{K} beta out of (0,1)")
            if kind == "linear" and (s.betas[0] != 1e-4 or (K > 1 and s.betas[-1] != 0.02)):
                bad.append(f"linear/{K} endpoints")
    eps = make_rng(2024).standard_normal(10_000)
    var = add_noise(np.zeros(10_000), eps, 1, schedule_from_betas([0.5, 0.5])).var()
    rel = abs(var - 0.75) / 0.75
    elapsed = time.time() - t0
    ok = not bad and rel <= 0.03 and elapsed < 30
    acceptance(2, "scheduler invariants", ok,
               f"{len(bad)} invariant violations, variance {var:.4f} (rel err {rel:.4f} <= 0.03), {elapsed:.2f}s")
    assert ok, bad


# ------------------------------------------------------------ 3

def test_c03_normalizer_round_trip(acceptance):
    rng = make_rng(77)
    data = rng.uniform(-1e3, 1e3, (10_000, 6))
    data[:, 1] = -4.5
    data[:, 4] = 0.0
    norm = fit_normalizer(data)
    err = float(np.max(np.abs(denormalize(normalize(data, norm), norm) - data)))
    ok = err <= 1e-6 and norm.degenerate.tolist() == [False, True, False, False, True, False]
    acceptance(3, "normalizer round trip", ok, f"max abs err {err:.2e} (<=1e-6), 2 degenerate dims")
    assert ok


# ------------------------------------------------------------ 4

def test_c04_determinism(acceptance, tmp_path):
    cfg = {
        "env": {"kind": "grid", "width": 7, "height": 7, "resolution": 7},
        "data": {"episodes": 8, "seed": 12, "augment": {"flip_prob": 0.5}},
        "model": {"encoder": {"mode": "hybrid", "conv_channels": [8], "depth": 2, "groupnorm_groups": 4,
                              "embed_dim": 16, "state_hidden": 16},
                  "denoiser": {"hidden": [32, 32], "timestep_embed_dim": 8}, "schedule": {"K": 20}},
        "train": {"optim": {"warmup_steps": 10}, "batch_size": 16, "train_steps": 60, "eval_episodes": 0,
                  "log_every": 5},
    }
    path = tmp_path / "cfg.yaml"
    path.write_text(yaml.safe_dump(cfg))
    hashes, losses = [], []
    for run in ("a", "b"):
        assert main(["gen-data", "--config", str(path), "--out", str(tmp_path / f"data_{run}")]) == 0
        hashes.append(_hash_tree(tmp_path / f"data_{run}"))
        assert main(["train", "--config", str(path), "--data", str(tmp_path / f"data_{run}"),
                     "--out", str(tmp_path / f"run_{run}")]) == 0
        rows = (tmp_path / f"run_{run}" / "metrics.csv").read_text().splitlines()[1:]
        col = [r.split(",")[1] for r in rows]
        losses.append(hashlib.sha256("\n".join(col).encode()).hexdigest())
    ok = hashes[0] == hashes[1] and losses[0] == losses[1]
    acceptance(4, "determinism", ok, f"store hashes equal={hashes[0] == hashes[1]}, "
                                     f"train_loss hashes equal={losses[0] == losses[1]} ({len(col)} rows)")
    assert ok


# ------------------------------------------------------------ 5

def test_c05_multimodality(acceptance):
    t0 = time.time()
    rng = make_rng(0)
    sched = make_schedule(100)
    cfg = DenoiserConfig(arch="film_mlp", hidden=[64, 64], timestep_embed_dim=16)
    opt = OptimConfig(learning_rate=1e-3, warmup_steps=100, total_steps=2000)
    steps, B = 2000, 64
    cond = np.ones((B, 1), np.float32)

    def two_modes():
        return np.where(rng.random((B, 1, 1)) < 0.5, -0.8, 0.8).astype(np.float32)

    store = ParamStore()
    net = build_denoiser(store, cfg, 1, 1, 1, make_rng(1))
    for i in range(steps):
        batch = DiffusionBatch.draw(two_modes(), cond, sched, rng)
        store.zero_grad()
        training_loss(net, batch, sched)
        adamw_step(store, opt, lr=opt.lr_at(i))
    s = sample(net, np.ones((500, 1), np.float32), sched, make_rng(5), (1, 1)).ravel()
    lo, hi = float(np.mean(np.abs(s + 0.8) <= 0.15)), float(np.mean(np.abs(s - 0.8) <= 0.15))

    # same network, regressing the action directly from the (constant) condition
    reg_store = ParamStore()
    reg = build_denoiser(reg_store, cfg, 1, 1, 1, make_rng(1))
    zeros, k0 = np.zeros((B, 1, 1), np.float32), np.zeros(B, dtype=np.int64)
    for i in range(steps):
        x0 = two_modes()
        reg_store.zero_grad()
        pred = reg.forward(zeros, k0, cond)
        reg.backward((2.0 * (pred - x0) / pred.size).astype(np.float32))
        adamw_step(reg_store, opt, lr=opt.lr_at(i))
    out = reg.forward(np.zeros((500, 1, 1), np.float32), np.zeros(500, dtype=np.int64),
                      np.ones((500, 1), np.float32)).ravel()
    mean_frac = float(np.mean(np.abs(out) <= 0.15))
    elapsed = time.time() - t0
    ok = lo >= 0.3 and hi >= 0.3 and mean_frac >= 0.9 and elapsed < 300
    acceptance(5, "multimodality vs MSE regression", ok,
               f"diffusion mass near -0.8 {lo:.3f}, near +0.8 {hi:.3f} (each >=0.30); "
               f"regression near 0 {mean_frac:.3f} (>=0.90); {elapsed:.1f}s")
    assert ok


# ------------------------------------------------------------ 6 & 11 share one trained point policy

@pytest.fixture(scope="module")
def point_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("point")
    cfg = CONFIGS / "point7.yaml"
    t0 = time.time()
    assert main(["gen-data", "--config", str(cfg), "--out", str(root / "data")]) == 0
    assert main(["train", "--config", str(cfg), "--data", str(root / "data"), "--out", str(root / "run")]) == 0
    random_cfg = _derived_config(cfg, root / "random.yaml", train_steps=0, optim={"warmup_steps": 0})
    assert main(["train", "--config", random_cfg, "--data", str(root / "data"), "--out", str(root / "random")]) == 0
    random_ckpt = _randomize_outputs(root / "random" / "checkpoint.dpck", root / "random_weights.dpck")
    return {"root": root, "config": cfg, "checkpoint": root / "run" / "checkpoint.dpck", "random": random_ckpt,
            "train_s": time.time() - t0}


@pytest.mark.slow
def test_c06_point_mass_imitation(acceptance, point_run, capsys):
    t0 = time.time()
    rate = _eval_rate(capsys, point_run["config"], point_run["checkpoint"])
    base = _eval_rate(capsys, point_run["config"], point_run["random"])
    total = point_run["train_s"] + time.time() - t0
    point_run["rate"] = rate
    ok = rate >= 0.8 and base <= 0.1 and total <= 1800
    acceptance(6, "PointMass 7x7 imitation", ok,
               f"success {rate:.2f} (>=0.80), random-weights baseline {base:.2f} (<=0.10), "
               f"{total / 60:.1f} min (<=30)")
    assert ok


@pytest.mark.slow
def test_c11_fine_tuning(acceptance, point_run, capsys):
    root = point_run["root"]
    before = point_run.get("rate")
    if before is None:
        before = _eval_rate(capsys, point_run["config"], point_run["checkpoint"])
    ft = CONFIGS / "point7_finetune.yaml"
    assert main(["gen-data", "--config", str(ft), "--out", str(root / "ft_data")]) == 0
    code = main(["train", "--config", str(ft), "--data", str(root / "ft_data"), "--out", str(root / "ft"),
                 "--resume", str(point_run["checkpoint"])])
    after = _eval_rate(capsys, point_run["config"], root / "ft" / "checkpoint.dpck")
    ok = code == 0 and before - after <= 0.15
    acceptance(11, "fine-tuning regression guard", ok,
               f"resume exit {code}; held-out success {before:.2f} -> {after:.2f} (drop {before - after:+.2f} <= 0.15)")
    assert ok


# ------------------------------------------------------------ 7

@pytest.mark.slow
def test_c07_grid_imitation(acceptance, tmp_path, capsys):
    cfg = CONFIGS / "grid9.yaml"
    t0 = time.time()
    assert main(["gen-data", "--config", str(cfg), "--out", str(tmp_path / "data")]) == 0
    assert main(["train", "--config", str(cfg), "--data", str(tmp_path / "data"), "--out", str(tmp_path / "run")]) == 0
    rate = _eval_rate(capsys, cfg, tmp_path / "run" / "checkpoint.dpck")
    total = time.time() - t0
    ok = rate >= 0.8 and total <= 1200
    acceptance(7, "GridMaze 9x9 imitation (one-hot relaxation)", ok,
               f"success {rate:.2f} (>=0.80), {total / 60:.1f} min (<=20)")
    assert ok


# ------------------------------------------------------------ 8

class _AlwaysLeft:
    def __init__(self, T_p):
        self.T_p = T_p

    def plan_batch(self, histories, rngs, envs):
        return np.tile(np.array([0.0, 0.0, 1.0, 0.0], np.float32), (len(histories), self.T_p, 1))


def _corridor(length):
    env = make_env(EnvConfig(kind="grid", width=length + 1, height=3, images=False, drift=DriftMode("none")))
    env.reset(0)
    env.spec = maze_from_ascii(["#" * (length + 3), "#S" + "." * (length - 1) + "G#", "#" * (length + 3)])
    env.state = GridState(env.spec.start, env.spec.goal)
    return env


def test_c08_closed_loop_contract(acceptance):
    got = {}
    for T_a in (2, 1):
        h = HorizonConfig(T_o=2, T_p=8, T_a=T_a)
        solved = run_closed_loop(_corridor(10), ExpertPlanner(8), h, 100, make_rng(0))
        capped = run_closed_loop(_corridor(10), _AlwaysLeft(8), h, 10, make_rng(0))
        got[T_a] = (solved.steps, solved.replan_count, capped.steps, capped.replan_count)
    ok = got[2] == (10, 5, 10, 5) and got[1] == (10, 10, 10, 10)
    acceptance(8, "closed-loop contract", ok,
               f"T_a=2: {got[2][1]} replans over 10 steps (==5); T_a=1: {got[1][1]} replans (==10)")
    assert ok


# ------------------------------------------------------------ 9

def test_c09_ema_closed_form(acceptance):
    store = ParamStore(dtype=np.float64)
    store.add("w", np.ones(3))
    ema = EmaState({"w": np.zeros(3)}, 0.75)
    for _ in range(10):
        ema_update(ema, store)
    v = ema.shadow["w"]
    err = float(np.max(np.abs(v - (1 - 0.75 ** 10))))
    ok = err <= 1e-9 and abs(v[0] - 0.9436865) < 5e-8
    acceptance(9, "EMA closed form", ok, f"shadow {v[0]:.10f}, |err| vs 1-0.75^10 = {err:.1e} (<=1e-9)")
    assert ok


# ------------------------------------------------------------ 10

def test_c10_maze_generator(acceptance):
    t0 = time.time()
    unsolved, mismatched = 0, 0
    for size in (5, 9, 15):
        for seed in range(1000):
            m = generate_maze(seed, size, size)
            unsolved += bfs_path(m.walls, m.start, m.goal) is None
            if seed % 50 == 0:
                mismatched += generate_maze(seed, size, size) != m
    elapsed = time.time() - t0
    ok = unsolved == 0 and mismatched == 0 and elapsed < 30
    acceptance(10, "maze generator", ok, f"{unsolved} unsolvable of 3000, {mismatched} nondeterministic, "
                                         f"{elapsed:.1f}s (<30s)")
    assert ok
