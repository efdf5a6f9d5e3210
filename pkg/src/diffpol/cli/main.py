"""``diffpol`` command line: gen-data, train, eval, verify, plot.

Exit codes: 0 ok, 1 invalid configuration or arguments, 2 runtime failure,
3 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from ..data import DemoStore, ExpertPlanner, MirrorRule, StoreError, collect
from ..envs import make_env
from ..nncore import CheckpointError, ConfigError, make_rng, rng_from_state
from ..policy import PolicyBundle
from ..train import EVAL_SEED_FLOOR, evaluate, fit_store_normalizers, train_step
from .config import ExperimentConfig, ValidationError, dump_config, load_config
from .plot import METRIC_COLUMNS, MetricsFormatError, plot_metrics
from .verify import run_checks

log = logging.getLogger("diffpol")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3
CHECKPOINT_NAME = "checkpoint.dpck"
TRAIN_RNG_SALT = 0x7EA1_5EED


class UsageError(ValueError):
    """Inputs that are individually valid but do not fit together."""


# ------------------------------------------------------------ gen-data

def cmd_gen_data(args) -> int:
    cfg = load_config(args.config)
    if args.episodes is not None:
        cfg.data.episodes = args.episodes
    if args.seed is not None:
        cfg.data.seed = args.seed
    errs = cfg.validate()
    if errs:
        raise ValidationError(errs)
    store = collect(cfg.env, cfg.data.episodes, cfg.data.seed, args.out, force=args.force)
    rate = float(np.mean(store.meta["expert_success"]))
    print(f"episodes={store.n_episodes} N={store.n_steps} expert_success_rate={rate:.3f} out={args.out}")
    return EXIT_OK


# ------------------------------------------------------------ train

def _check_compatible(cfg: ExperimentConfig, store: DemoStore, bundle: PolicyBundle | None = None) -> None:
    """Raise before training if data, env and model disagree on shapes."""
    env = make_env(cfg.env)
    problems = []
    stored_kind = store.meta.get("env_config", {}).get("kind")
    if stored_kind is not None and stored_kind != cfg.env.kind:
        problems.append(f"data was collected in a {stored_kind!r} env but config env.kind is {cfg.env.kind!r}")
    if store.actions.shape[1] != env.action_dim:
        problems.append(f"data action dim {store.actions.shape[1]} != {cfg.env.kind} env action dim {env.action_dim}")
    if store.states.shape[1] != env.state_dim:
        problems.append(f"data state dim {store.states.shape[1]} != env state dim {env.state_dim}")
    uses_images = (bundle.uses_images if bundle else cfg.model.encoder.mode != "state")
    if uses_images:
        if store.images is None:
            problems.append("model needs images but the data store has none (collect with env.images: true)")
        elif tuple(store.images.shape[1:]) != env.image_shape:
            problems.append(f"data image shape {tuple(store.images.shape[1:])} != env image shape {env.image_shape}")
    if bundle is not None:
        if bundle.action_dim != env.action_dim:
            problems.append(f"checkpoint action dim {bundle.action_dim} != env action dim {env.action_dim}")
        if bundle.state_dim != env.state_dim:
            problems.append(f"checkpoint state dim {bundle.state_dim} != env state dim {env.state_dim}")
        if bundle.uses_images and bundle.image_shape != env.image_shape:
            problems.append(f"checkpoint image shape {bundle.image_shape} != env image shape {env.image_shape}")
    if problems:
        raise UsageError("; ".join(problems))


class MetricsWriter:
    def __init__(self, path: Path, append: bool):
        self.path = path
        self.last_step = -1
        if append and path.exists():
            with open(path, newline="") as fh:
                rows = list(csv.reader(fh))
            if rows and rows[0] == METRIC_COLUMNS and len(rows) > 1:
                self.last_step = int(float(rows[-1][0]))
            self._fh = open(path, "a", newline="")
        else:
            self._fh = open(path, "w", newline="")
            self._fh.write(",".join(METRIC_COLUMNS) + "\n")
        self._csv = csv.writer(self._fh, lineterminator="\n")

    def write(self, step: int, loss, success=None, mean_reward=None, reward_std=None, wallclock=0.0):
        if step <= self.last_step:
            raise RuntimeError(f"metrics step {step} does not increase past {self.last_step}")
        self.last_step = step

        def cell(v, fmt="{:.6g}"):
            return "" if v is None else fmt.format(v)

        self._csv.writerow([step, cell(loss, "{!r}"), cell(success), cell(mean_reward), cell(reward_std),
                            f"{wallclock:.3f}"])
        self._fh.flush()

    def close(self):
        self._fh.close()


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    store = DemoStore.open(args.data)
    t = cfg.train
    rule = MirrorRule.for_env(cfg.env.kind, cfg.env.width) if cfg.data.augment.flip_prob > 0 else None
    if args.resume:
        bundle, meta = PolicyBundle.load(args.resume)
        _check_compatible(cfg, store, bundle)
        if bundle.cfg != cfg.model:
            log.warning("resuming: model section of %s is ignored; the checkpoint's architecture is used",
                        args.config)
        if bundle.ema is None:
            bundle.init_ema(t.ema_decay)
        rng = rng_from_state(meta["rng_state"]) if "rng_state" in meta else make_rng(t.seed ^ TRAIN_RNG_SALT)
        # fine-tuning keeps the original normalizers so the policy's output scale does not move
        log.info("resumed from %s at step %d", args.resume, bundle.params.step_count)
    else:
        _check_compatible(cfg, store)
        an, sn = fit_store_normalizers(store, rule)
        env = make_env(cfg.env)
        bundle = PolicyBundle(cfg.model, env.action_dim, env.state_dim, env.image_shape, an, sn, seed=t.seed)
        bundle.init_ema(t.ema_decay)
        rng = make_rng(t.seed ^ TRAIN_RNG_SALT)
    start = bundle.params.step_count
    (out / "config.yaml").write_text(dump_config(cfg))
    metrics = MetricsWriter(out / "metrics.csv", append=bool(args.resume))
    h = bundle.cfg.horizons
    t0 = time.time()
    window = []
    last_eval = None
    try:
        for i in range(t.train_steps):
            loss = train_step(bundle, store, t.batch_size, t.optim, rng, cfg.data.augment, rule,
                              lr=t.optim.lr_at(i))
            step = start + i + 1
            if not math.isfinite(loss):
                raise FloatingPointError(f"non-finite training loss at step {step}")
            window.append(loss)
            final = i == t.train_steps - 1
            do_eval = t.eval_episodes > 0 and ((t.eval_period and (i + 1) % t.eval_period == 0) or final)
            if do_eval or step % t.log_every == 0 or final:
                ev = None
                if do_eval:
                    with bundle.ema_weights():
                        ev = evaluate(bundle, cfg.env, t.eval_episodes, t.eval_seed, h)
                    last_eval = ev
                mean_loss = float(np.mean(window))
                metrics.write(step, mean_loss, ev and ev.success_rate, ev and ev.mean_reward,
                              ev and ev.reward_std, time.time() - t0)
                msg = f"step {step} loss {mean_loss:.5f}"
                if ev is not None:
                    msg += f" eval_success {ev.success_rate:.3f} eval_reward {ev.mean_reward:.3f}"
                log.info(msg)
                window = []
    finally:
        metrics.close()
    extra = {"experiment": cfg.to_dict(), "data_dir": str(args.data), "resumed_from": args.resume}
    if last_eval is not None:
        extra["last_eval"] = {"success_rate": last_eval.success_rate, "mean_reward": last_eval.mean_reward,
                              "seed": t.eval_seed, "episodes": t.eval_episodes}
    bundle.save(out / CHECKPOINT_NAME, extra, rng=rng)
    summary = f"trained steps {start + 1}..{bundle.params.step_count} checkpoint={out / CHECKPOINT_NAME}"
    if last_eval is not None:
        summary += f" eval_success_rate={last_eval.success_rate:.3f}"
    print(summary)
    return EXIT_OK


# ------------------------------------------------------------ eval

def cmd_eval(args) -> int:
    cfg = load_config(args.config)
    n = args.episodes if args.episodes is not None else cfg.train.eval_episodes
    seed = args.seed if args.seed is not None else cfg.train.eval_seed
    if n < 1:
        raise UsageError(f"--episodes must be >= 1 (got {n})")
    if seed < EVAL_SEED_FLOOR:
        log.warning("evaluation seed %d overlaps the training seed space (< 2^31)", seed)
    env = make_env(cfg.env)
    if args.expert:
        planner, horizons, what = ExpertPlanner(cfg.model.horizons.T_p), cfg.model.horizons, "expert"
    else:
        if not args.checkpoint:
            raise UsageError("eval needs --checkpoint (or --expert)")
        planner, _ = PolicyBundle.load(args.checkpoint, weights="ema")
        if planner.action_dim != env.action_dim or planner.state_dim != env.state_dim:
            raise UsageError(f"checkpoint action/state dims ({planner.action_dim}, {planner.state_dim}) do not "
                             f"match the {cfg.env.kind} env ({env.action_dim}, {env.state_dim})")
        if planner.uses_images and planner.image_shape != env.image_shape:
            raise UsageError(f"checkpoint image shape {planner.image_shape} != env image shape {env.image_shape}")
        horizons, what = planner.cfg.horizons, args.checkpoint
    rep = evaluate(planner, cfg.env, n, seed, horizons)
    print(f"policy={what} env={cfg.env.kind} {cfg.env.width}x{cfg.env.height} drift={cfg.env.drift.kind} "
          f"episodes={n} seed={seed}")
    print(f"success_rate={rep.success_rate:.4f} mean_reward={rep.mean_reward:.4f} "
          f"max_reward={rep.max_reward:.4f} reward_std={rep.reward_std:.4f} mean_steps={rep.mean_steps:.2f}")
    if args.out:
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["episode", "seed", "total_reward", "steps", "success", "replan_count"])
            for i, (r, s) in enumerate(zip(rep.results, rep.seeds)):
                w.writerow([i, s, f"{r.total_reward:.6g}", r.steps, int(r.success), r.replan_count])
    return EXIT_OK


# ------------------------------------------------------------ verify / plot

def cmd_verify(args) -> int:
    results = run_checks(print)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


def cmd_plot(args) -> int:
    n = plot_metrics(args.metrics, args.out)
    print(f"plotted {n} rows -> {args.out}")
    return EXIT_OK


# ------------------------------------------------------------ entry

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="diffpol", description="Diffusion-policy imitation on procedural mazes.")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="collect scripted-expert demonstrations")
    g.add_argument("--config", required=True)
    g.add_argument("--out", required=True)
    g.add_argument("--episodes", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--force", action="store_true", help="overwrite an existing store")
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="train (or with --resume, fine-tune) a policy")
    t.add_argument("--config", required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--resume", help="checkpoint to continue from")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="closed-loop evaluation on held-out maze seeds")
    e.add_argument("--config", required=True)
    e.add_argument("--checkpoint")
    e.add_argument("--episodes", type=int)
    e.add_argument("--seed", type=int)
    e.add_argument("--out", help="per-episode CSV")
    e.add_argument("--expert", action="store_true", help="evaluate the scripted expert instead of a checkpoint")
    e.set_defaults(func=cmd_eval)

    v = sub.add_parser("verify", help="run the property suite")
    v.set_defaults(func=cmd_verify)

    pl = sub.add_parser("plot", help="SVG chart of metrics.csv")
    pl.add_argument("metrics")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage; report it as invalid input
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValidationError, ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (StoreError, CheckpointError, MetricsFormatError, OSError, FloatingPointError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
