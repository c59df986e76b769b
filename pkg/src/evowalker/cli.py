"""Command-line entry point: evolve, sweep, pretrain, distill, eval."""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

from .checkpoint import (KIND_EVOLUTION, KIND_POLICY, KIND_STUDENT, CheckpointError,
                         load_checkpoint, save_checkpoint)
from .config import (DEFAULT_CONFIG_TEXT, ConfigError, RunConfig, config_hash,
                     load_config)
from .env.ledger import derive_seed, make_fair_ledger
from .env.observation import PHASE_TEACHER
from .env.rewards import TERM_NAMES
from .env.walker_env import WalkerEnv
from .evo.loop import evolve
from .metrics import MetricsRecord, cost_of_transport, froude_number
from .rl.distill import distill_student, student_cell, student_vs_teacher
from .rl.policy import proprio_scales, scaled_inputs
from .rl.trainer import pretrain_shared
from .sim.model import LegLengths, build_walker
from .sweep import grid_sweep, surface_rows, surface_to_json

GENERATIONS_CSV = "generations.csv"
SURFACE_CSV = "surface.csv"
SURFACE_JSON = "surface.json"
METRICS_CSV = "metrics.csv"
BREAKDOWN_CSV = "breakdown.csv"
TRAIN_TRACE_CSV = "train_trace.csv"
DISTILL_TRACE_CSV = "distill_trace.csv"
EVOLUTION_CKPT = "evolution.ckpt"
BEST_POLICY_CKPT = "best_policy.ckpt"
PRETRAIN_CKPT = "pretrain_policy.ckpt"
STUDENT_CKPT = "student.ckpt"

_METRIC_TERMS = tuple(TERM_NAMES) + ("failure",)


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.9g}"
    return str(x)


def write_csv(path: str, header, rows):
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    os.replace(tmp, path)


def _load_run_config(args) -> RunConfig:
    if args.config is None:
        cfg = RunConfig()
    else:
        cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
    if getattr(args, "workers", None) is not None:
        cfg.workers = args.workers
    cfg.validate()
    return cfg


def _outdir(args) -> str:
    out = args.out or "evowalker_out"
    os.makedirs(out, exist_ok=True)
    return out


def _write_generations_csv(path: str, history):
    header = ["generation", "individual", "thigh_m", "shin_m", "total_reward",
              "shifted_fitness"]
    rows = [[r["generation"], r["individual"], r["thigh_m"], r["shin_m"],
             r["total_reward"], r["shifted_fitness"]]
            for rec in history for r in rec["rows"]]
    write_csv(path, header, rows)


def cmd_evolve(args) -> int:
    cfg = _load_run_config(args)
    out = _outdir(args)
    chash = config_hash(cfg)
    state = None
    if args.resume:
        kind, payload, stored_hash = load_checkpoint(args.resume, KIND_EVOLUTION)
        if stored_hash != chash:
            raise ConfigError(
                f"resume checkpoint was created with a different configuration "
                f"(hash {stored_hash[:12]}... vs {chash[:12]}...)")
        state = payload["state"]
        print(f"resuming after generation {state.next_generation - 1}")

    def on_generation(st):
        save_checkpoint(os.path.join(out, EVOLUTION_CKPT), KIND_EVOLUTION,
                        {"state": st}, chash)
        _write_generations_csv(os.path.join(out, GENERATIONS_CSV), st.history)

    result = evolve(cfg, state=state, on_generation=on_generation, log=print)
    _write_generations_csv(os.path.join(out, GENERATIONS_CSV), result.history)
    if result.best_params is not None:
        save_checkpoint(os.path.join(out, BEST_POLICY_CKPT), KIND_POLICY,
                        {"policy": result.best_params}, chash)
    print(f"best design: thigh {result.best_lengths.thigh_m:.2f} m, "
          f"shin {result.best_lengths.shin_m:.2f} m "
          f"(reward {result.best_total_reward:.3f} at generation "
          f"{result.best_generation}; final-ledger reward "
          f"{result.final_ledger_reward:.3f})")
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_run_config(args)
    out = _outdir(args)
    warm = None
    if cfg.evo.fitness_mode == "rl":
        if args.warm_start:
            _, payload, _ = load_checkpoint(args.warm_start, KIND_POLICY)
            warm = payload["policy"]
        else:
            print(f"pretraining shared policy ({cfg.train.pretrain_iterations} iterations)")
            warm, _ = pretrain_shared(cfg)
    ledger = make_fair_ledger(args.generation, cfg.master_seed)
    surface = grid_sweep(cfg, ledger, warm)
    rows = [[c["thigh_m"], c["shin_m"], c["reward"], int(c["failed"])]
            for c in surface_rows(surface)]
    write_csv(os.path.join(out, SURFACE_CSV),
              ["thigh_m", "shin_m", "reward", "failed"], rows)
    with open(os.path.join(out, SURFACE_JSON), "w", encoding="utf-8") as fh:
        fh.write(surface_to_json(surface))
    best_t, best_s = surface.argmax_cell
    print(f"swept {len(rows)} cells; best cell thigh {best_t:.2f} m, shin {best_s:.2f} m")
    return 0


def cmd_pretrain(args) -> int:
    cfg = _load_run_config(args)
    out = _outdir(args)
    iterations = args.iterations if args.iterations is not None else None
    pp, stats = pretrain_shared(cfg, iterations)
    save_checkpoint(os.path.join(out, PRETRAIN_CKPT), KIND_POLICY,
                    {"policy": pp}, config_hash(cfg))
    write_csv(os.path.join(out, TRAIN_TRACE_CSV),
              ["iteration", "mean_reward", "actor_loss", "value_loss", "entropy", "kl"],
              [[r["iteration"], r["mean_reward"], r["actor_loss"], r["value_loss"],
                r["entropy"], r["kl"]] for r in stats.rows])
    last = stats.reward_trace[-1] if stats.reward_trace else float("nan")
    print(f"pretrained {len(stats.reward_trace)} iterations; "
          f"final mean reward {last:.3f}")
    return 0


def cmd_distill(args) -> int:
    cfg = _load_run_config(args)
    out = _outdir(args)
    _, payload, _ = load_checkpoint(args.teacher, KIND_POLICY)
    teacher = payload["policy"]
    if teacher.morphology is None:
        raise ConfigError("teacher checkpoint carries no morphology; cannot distill")
    t_len = tuple(round(v, 10) for v in teacher.morphology)
    c_len = tuple(round(v, 10) for v in cfg.morphology)
    if t_len != c_len:
        print(f"error: teacher was trained on thigh {t_len[0]:.2f} m / "
              f"shin {t_len[1]:.2f} m but the configuration asks for "
              f"thigh {c_len[0]:.2f} m / shin {c_len[1]:.2f} m", file=sys.stderr)
        return 1
    model = build_walker(LegLengths(*t_len), cfg.sim, cfg.design.thigh_range)
    updates = args.updates if args.updates is not None else None
    student, trace = distill_student(teacher, model, cfg, updates)
    save_checkpoint(os.path.join(out, STUDENT_CKPT), KIND_STUDENT,
                    {"student": student, "teacher_morphology": t_len}, config_hash(cfg))
    write_csv(os.path.join(out, DISTILL_TRACE_CSV),
              ["update", "action_loss", "velocity_loss"],
              [[r["update"], r["action_loss"], r["velocity_loss"]] for r in trace])
    if trace:
        held_out = student_vs_teacher(student, teacher, model, cfg, cfg.master_seed)
        print(f"distilled {len(trace)} updates; held-out action RMS "
              f"{held_out['action_rms']:.4f} rad, velocity RMS "
              f"{held_out['velocity_rms']:.4f} m/s")
    else:
        print("distilled 0 updates; student checkpoint holds the initialization")
    return 0


def _policy_actor(policy):
    enc, actor, _ = policy.nets()
    dt = np.dtype(policy.dtype)

    def act(obs, done_mask):
        ov, priv = scaled_inputs(policy, obs)
        z, _ = enc.forward(policy.params["enc"], priv)
        mean, _ = actor.forward(policy.params["actor"],
                                np.concatenate([ov.astype(dt), z], axis=1))
        return mean.astype(np.float64)

    return act


def _student_actor(student, num_envs):
    gru, actor = student.nets()
    dt = np.dtype(student.dtype)
    scales = proprio_scales(student.task)
    hidden = {"h": np.zeros((num_envs, student.gru_hidden), dtype=dt)}

    def act(obs, done_mask):
        if done_mask is not None and done_mask.any():
            hidden["h"] = hidden["h"] * (~done_mask[:, None]).astype(dt)
        action, h, _, _, _ = student_cell(student, gru, actor,
                                          (obs.proprio * scales).astype(dt), hidden["h"])
        hidden["h"] = h
        return action.astype(np.float64)

    return act


def cmd_eval(args) -> int:
    cfg = _load_run_config(args)
    out = _outdir(args)
    kind, payload, _ = load_checkpoint(args.policy)
    if kind == KIND_POLICY:
        controller = payload["policy"]
        make_actor = lambda: _policy_actor(controller)
    elif kind == KIND_STUDENT:
        controller = payload["student"]
        make_actor = lambda: _student_actor(controller, 1)
    else:
        raise CheckpointError(f"{args.policy} holds a {kind!r} checkpoint; "
                              "eval needs a policy or student")
    morphology = controller.morphology or cfg.morphology
    model = build_walker(LegLengths(*morphology), cfg.sim, cfg.design.thigh_range)
    episodes = args.episodes if args.episodes is not None else cfg.eval_episodes

    metric_rows = []
    breakdown_rows = []
    leg_length = model.lengths.total
    for ep in range(episodes):
        env = WalkerEnv(model, cfg, num_envs=1)
        ledger = make_fair_ledger(0, derive_seed(cfg.master_seed, 0xE7A1, ep))
        obs = env.reset(ledger)
        act = make_actor()
        powers, vels = [], []
        vmax = -np.inf
        total = 0.0
        term_totals = dict.fromkeys(_METRIC_TERMS, 0.0)
        done_mask = None
        for step in range(cfg.episode_steps):
            action = act(obs, done_mask)
            obs, reward, done, info = env.step(action)
            total += float(reward[0])
            powers.append(float(info["power"][0]))
            vels.append(float(info["vx"][0]))
            vmax = max(vmax, float(info["vx"][0]))
            for name in _METRIC_TERMS:
                value = info["breakdown"].terms.get(name)
                v = float(value[0]) if value is not None else 0.0
                term_totals[name] += v
                breakdown_rows.append([ep, step, name, v])
            done_mask = done
            if done[0]:
                break
        try:
            cot = cost_of_transport(powers, model.total_mass, vels, model.gravity)
        except Exception:
            cot = None
        rec = MetricsRecord(
            mean_power=float(np.mean(powers)), mass=model.total_mass,
            mean_velocity=float(np.mean(vels)), max_velocity=vmax, cot=cot,
            # keep the column recomputable from the rounded CSV columns
            froude=froude_number(float(_fmt(max(vmax, 0.0))),
                                 float(_fmt(leg_length)), model.gravity),
            leg_length=leg_length)
        assert rec.finite(), f"non-finite metrics in episode {ep}"
        metric_rows.append(
            [ep, len(vels), total, rec.mean_velocity, rec.max_velocity,
             rec.mean_power, "" if rec.cot is None else rec.cot,
             0 if rec.cot is None else 1, rec.froude, rec.leg_length]
            + [term_totals[n] for n in _METRIC_TERMS])

    header = (["episode", "steps", "total_reward", "mean_velocity", "max_velocity",
               "mean_power", "cot", "cot_defined", "froude", "leg_length"]
              + [f"term_{n}" for n in _METRIC_TERMS])
    write_csv(os.path.join(out, METRICS_CSV), header, metric_rows)
    write_csv(os.path.join(out, BREAKDOWN_CSV),
              ["episode", "step", "term", "value"], breakdown_rows)
    print(f"evaluated {episodes} episode(s); metrics written to "
          f"{os.path.join(out, METRICS_CSV)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evowalker",
        description="Evolve planar-biped leg lengths with learned locomotion "
                    "reward as fitness; distill and evaluate the winners.")
    parser.add_argument("--print-default-config", action="store_true",
                        help="print the default configuration and exit")
    sub = parser.add_subparsers(dest="command")

    def common(p, resume=False):
        p.add_argument("--config", default=None, help="YAML run configuration")
        p.add_argument("--seed", type=int, default=None, help="override master_seed")
        p.add_argument("--workers", type=int, default=None, help="override worker count")
        p.add_argument("--out", default=None, help="output directory")
        if resume:
            p.add_argument("--resume", default=None,
                           help="evolution checkpoint to continue from")

    p = sub.add_parser("evolve", help="run the full search")
    common(p, resume=True)
    p.set_defaults(fn=cmd_evolve)

    p = sub.add_parser("sweep", help="evaluate the whole design grid")
    common(p)
    p.add_argument("--warm-start", default=None, help="policy checkpoint to start from")
    p.add_argument("--generation", type=int, default=1,
                   help="ledger generation index to evaluate under")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("pretrain", help="train the shared warm-start policy")
    common(p)
    p.add_argument("--iterations", type=int, default=None)
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("distill", help="distill a teacher into the recurrent student")
    common(p)
    p.add_argument("--teacher", required=True, help="policy checkpoint to imitate")
    p.add_argument("--updates", type=int, default=None)
    p.set_defaults(fn=cmd_distill)

    p = sub.add_parser("eval", help="roll out a checkpoint and write metrics")
    common(p)
    p.add_argument("--policy", required=True, help="policy or student checkpoint")
    p.add_argument("--episodes", type=int, default=None)
    p.set_defaults(fn=cmd_eval)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_default_config:
        print(DEFAULT_CONFIG_TEXT, end="")
        return 0
    if not getattr(args, "command", None):
        parser.print_help()
        return 2
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except CheckpointError as exc:
        print(f"checkpoint error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
