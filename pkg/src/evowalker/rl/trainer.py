"""Inner training loop: rollouts, advantage estimation, policy updates."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import RunConfig
from ..env.ledger import SeedLedger, derive_seed, make_fair_ledger
from ..env.observation import PHASE_TEACHER
from ..env.walker_env import WalkerEnv
from ..sim.model import LegLengths, WalkerModel, build_walker
from .gae import compute_gae
from .nets import Adam
from .policy import PolicyParams, gaussian_logp, init_policy, log_std_clipped, scaled_inputs
from .ppo import RolloutBatch, ppo_update

_TRAIN_TAG = 0x7261
_PRETRAIN_TAG = 0x9157
_INIT_TAG = 0x1123


class TrainingFailure(RuntimeError):
    """More than half of the rollout environments diverged in one iteration."""


@dataclass
class TrainStats:
    """Per-iteration trace rows plus rollout bookkeeping."""

    reward_trace: list = field(default_factory=list)   # episodic-scale reward per iteration
    rows: list = field(default_factory=list)           # dict rows for train_trace.csv
    completed_returns: list = field(default_factory=list)


def collect_rollout(env: WalkerEnv, pp: PolicyParams, hyper, rng, obs):
    """Roll `steps_per_iteration` control steps; returns (batch, next obs, info)."""
    enc, actor, critic = pp.nets()
    dt = np.dtype(pp.dtype)
    steps, n = hyper.steps_per_iteration, env.num_envs
    log_std = log_std_clipped(pp)
    sigma = np.exp(log_std)

    ov_buf = np.zeros((steps, n, 0), dtype=dt)
    priv_buf = None
    acts = np.zeros((steps, n, pp.num_actions))
    logps = np.zeros((steps, n))
    rewards = np.zeros((steps, n))
    values = np.zeros((steps, n))
    dones = np.zeros((steps, n))
    diverged_total = 0
    completed = []

    for t in range(steps):
        ov, priv = scaled_inputs(pp, obs)
        z, _ = enc.forward(pp.params["enc"], priv)
        x = np.concatenate([ov.astype(dt), z], axis=1)
        mean, _ = actor.forward(pp.params["actor"], x)
        v, _ = critic.forward(pp.params["critic"], x)
        mean64 = mean.astype(np.float64)
        action = mean64 + sigma * rng.standard_normal(mean64.shape)
        logp = gaussian_logp(action, mean64, log_std)

        if priv_buf is None:
            ov_buf = np.zeros((steps, n, ov.shape[1]), dtype=np.float64)
            priv_buf = np.zeros((steps, n, priv.shape[1]), dtype=np.float64)
        ov_buf[t] = ov
        priv_buf[t] = priv
        acts[t] = action
        logps[t] = logp
        values[t] = v[:, 0].astype(np.float64)

        obs, reward, done, info = env.step(action)
        # truncation is not failure: bootstrap through the time limit
        rewards[t] = reward + hyper.gamma * values[t] * info["time_outs"]
        dones[t] = done
        diverged_total += int(info["diverged"].sum())
        completed.extend(info["completed_returns"])

    ov_last, priv_last = scaled_inputs(pp, obs)
    z, _ = enc.forward(pp.params["enc"], priv_last)
    x = np.concatenate([ov_last.astype(dt), z], axis=1)
    v_last, _ = critic.forward(pp.params["critic"], x)

    batch = RolloutBatch(proprio_velocity=ov_buf, privileged=priv_buf, actions=acts,
                         log_probs=logps, rewards=rewards, values=values, dones=dones,
                         bootstrap_value=v_last[:, 0].astype(np.float64))
    return batch, obs, {"diverged": diverged_total, "completed": completed}


def run_training(env: WalkerEnv, pp: PolicyParams, iterations: int, ledger: SeedLedger,
                 cfg: RunConfig, rng: np.random.Generator) -> tuple[PolicyParams, TrainStats]:
    """Shared train loop: rollout -> GAE -> update, `iterations` times."""
    hyper = cfg.train
    stats = TrainStats()
    optimizer = Adam(pp.params, hyper.learning_rate, max_grad_norm=hyper.max_grad_norm)
    obs = env.reset(ledger)
    for it in range(iterations):
        batch, obs, info = collect_rollout(env, pp, hyper, rng, obs)
        if info["diverged"] > 0.5 * env.num_envs:
            raise TrainingFailure(
                f"{info['diverged']} of {env.num_envs} environments diverged "
                f"in iteration {it + 1}")
        batch.advantages, batch.returns = compute_gae(
            batch.rewards, batch.values, batch.dones, batch.bootstrap_value,
            hyper.gamma, hyper.gae_lambda)
        pp, upd = ppo_update(pp, batch, hyper, optimizer, rng)
        # mean per-step reward expressed on the episodic scale
        ep_reward = float(batch.rewards.mean()) * cfg.episode_steps
        stats.reward_trace.append(ep_reward)
        stats.completed_returns.extend(info["completed"])
        stats.rows.append({
            "iteration": it + 1, "mean_reward": ep_reward,
            "actor_loss": upd.actor_loss, "value_loss": upd.value_loss,
            "entropy": upd.entropy, "kl": upd.approx_kl,
            "diverged_envs": info["diverged"], "aborted": int(upd.aborted),
        })
    return pp, stats


def train_policy(model: WalkerModel, init: PolicyParams, iterations: int,
                 ledger: SeedLedger, cfg: RunConfig,
                 stream_key: tuple = ()) -> tuple[PolicyParams, TrainStats]:
    """Train a copy of `init` on one morphology under the generation ledger.

    Fully deterministic in (model, init, iterations, ledger, cfg, stream_key):
    the action-sampling and minibatch streams derive from the ledger and the
    caller-supplied key, never from wall clock or evaluation order.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    pp = init.copy()
    pp.morphology = model.lengths.as_tuple()
    env = WalkerEnv(model, cfg, num_envs=cfg.train.num_envs)
    rng = np.random.default_rng(np.random.SeedSequence(
        entropy=[ledger.master_seed, ledger.generation, _TRAIN_TAG, *map(int, stream_key)]))
    return run_training(env, pp, iterations, ledger, cfg, rng)


def lattice_sampler(cfg: RunConfig):
    """Uniform morphology draws on the design lattice, one per episode."""
    lo_t, hi_t = cfg.design.thigh_range
    lo_s, hi_s = cfg.design.shin_range
    res = cfg.design.resolution
    n_t = int(round((hi_t - lo_t) / res)) + 1
    n_s = int(round((hi_s - lo_s) / res)) + 1

    def sample(rng: np.random.Generator) -> WalkerModel:
        lengths = LegLengths(round(lo_t + res * rng.integers(n_t), 10),
                             round(lo_s + res * rng.integers(n_s), 10))
        return build_walker(lengths, cfg.sim, cfg.design.thigh_range)

    return sample


def pretrain_shared(cfg: RunConfig, iterations: int | None = None
                    ) -> tuple[PolicyParams, TrainStats]:
    """Warm-start policy trained across morphologies sampled from the lattice.

    Gives every individual the same starting competence so the outer search
    rewards good morphologies rather than fast learners. iterations = 0
    returns the freshly initialized parameters untouched.
    """
    if iterations is None:
        iterations = cfg.train.pretrain_iterations
    init_rng = np.random.default_rng(np.random.SeedSequence(
        entropy=[cfg.master_seed, _INIT_TAG]))
    pp = init_policy(cfg.task, cfg.train, init_rng)
    if iterations == 0:
        return pp, TrainStats()
    ledger = make_fair_ledger(0, derive_seed(cfg.master_seed, _PRETRAIN_TAG))
    nominal = build_walker(LegLengths(*cfg.morphology), cfg.sim, cfg.design.thigh_range)
    env = WalkerEnv(nominal, cfg, num_envs=cfg.train.num_envs,
                    morphology_sampler=lattice_sampler(cfg))
    rng = np.random.default_rng(np.random.SeedSequence(
        entropy=[cfg.master_seed, _PRETRAIN_TAG, _TRAIN_TAG]))
    return run_training(env, pp, iterations, ledger, cfg, rng)


def evaluate_policy(pp: PolicyParams, model: WalkerModel, cfg: RunConfig,
                    ledger: SeedLedger, episodes: int = 1, num_envs: int = 1):
    """Deterministic-action rollouts; returns one record dict per episode."""
    env = WalkerEnv(model, cfg, num_envs=num_envs)
    enc, actor, _ = pp.nets()
    dt = np.dtype(pp.dtype)
    records = []
    for ep in range(episodes):
        ep_ledger = make_fair_ledger(ledger.generation, derive_seed(ledger.master_seed, ep))
        obs = env.reset(ep_ledger)
        ret = np.zeros(num_envs)
        vx_sum = np.zeros(num_envs)
        vx_max = np.full(num_envs, -np.inf)
        power_sum = np.zeros(num_envs)
        alive_steps = np.zeros(num_envs)
        term_sums = {}
        alive = np.ones(num_envs, dtype=bool)
        for _ in range(cfg.episode_steps):
            ov, priv = scaled_inputs(pp, obs)
            z, _ = enc.forward(pp.params["enc"], priv)
            mean, _ = actor.forward(pp.params["actor"],
                                    np.concatenate([ov.astype(dt), z], axis=1))
            obs, reward, done, info = env.step(mean.astype(np.float64))
            ret += reward * alive
            vx_sum += info["vx"] * alive
            vx_max = np.maximum(vx_max, np.where(alive, info["vx"], -np.inf))
            power_sum += info["power"] * alive
            for name, vals in info["breakdown"].terms.items():
                term_sums.setdefault(name, np.zeros(num_envs))
                term_sums[name] += np.asarray(vals) * alive
            alive_steps += alive
            alive &= ~done
            if not alive.any():
                break
        denom = np.maximum(alive_steps, 1.0)
        records.append({
            "episode": ep, "steps": float(alive_steps.mean()), "return": float(ret.mean()),
            "mean_velocity": float((vx_sum / denom).mean()),
            "max_velocity": float(vx_max.max()),
            "mean_power": float((power_sum / denom).mean()),
            "terms": {k: float(v.mean()) for k, v in term_sums.items()},
        })
    return records
