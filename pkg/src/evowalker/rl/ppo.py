"""Clipped-surrogate policy update with value regression and entropy bonus."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import TrainHyper
from .nets import Adam, tree_copy, tree_finite
from .policy import LOG_2PI, PolicyParams, gaussian_logp


@dataclass
class RolloutBatch:
    """Time-major rollout: leading axes (steps, num_envs)."""

    proprio_velocity: np.ndarray   # (T, N, d_ov) already scaled
    privileged: np.ndarray         # (T, N, d_priv) already scaled, encoder input
    actions: np.ndarray            # (T, N, A)
    log_probs: np.ndarray          # (T, N)
    rewards: np.ndarray            # (T, N)
    values: np.ndarray             # (T, N)
    dones: np.ndarray              # (T, N)
    advantages: np.ndarray = None
    returns: np.ndarray = None
    bootstrap_value: np.ndarray = None

    @property
    def size(self) -> int:
        return self.rewards.shape[0] * self.rewards.shape[1]

    def flat(self, arr):
        return arr.reshape(self.size, *arr.shape[2:])


@dataclass
class UpdateStats:
    actor_loss: float = 0.0
    value_loss: float = 0.0
    entropy: float = 0.0
    approx_kl: float = 0.0
    aborted: bool = False
    note: str = ""
    extras: dict = field(default_factory=dict)


def normalize_advantages(adv):
    """Zero-mean unit-std advantages (identity for a single sample)."""
    adv = np.asarray(adv, dtype=np.float64)
    if adv.size <= 1:
        return adv - adv.mean()
    std = adv.std()
    return (adv - adv.mean()) / (std + 1e-8)


def ppo_loss_and_grads(pp: PolicyParams, x_ov, x_pr, actions, logp_old, adv, returns,
                       hyper: TrainHyper):
    """Losses and analytic gradients for one minibatch.

    The objective is: clipped-surrogate actor loss + value_coef * value MSE
    - entropy_coef * Gaussian entropy. Gradients flow from both heads through
    the shared latent into the privileged encoder. Returns (losses, grads).
    """
    enc, actor, critic = pp.nets()
    dt = np.dtype(pp.dtype)
    lo_b, hi_b = pp.log_std_bounds
    eps_clip = hyper.clip_ratio
    n = x_ov.shape[0]

    z, c_enc = enc.forward(pp.params["enc"], x_pr)
    x = np.concatenate([np.asarray(x_ov).astype(dt), z], axis=1)
    mean, c_act = actor.forward(pp.params["actor"], x)
    v_pred, c_cri = critic.forward(pp.params["critic"], x)
    v_pred = v_pred[:, 0].astype(np.float64)
    log_std = np.clip(pp.params["log_std"].astype(np.float64), lo_b, hi_b)
    mean64 = mean.astype(np.float64)
    lp_new = gaussian_logp(actions, mean64, log_std)

    ratio = np.exp(lp_new - logp_old)
    clipped = np.clip(ratio, 1.0 - eps_clip, 1.0 + eps_clip)
    unclipped_wins = ratio * adv <= clipped * adv
    surrogate = np.minimum(ratio * adv, clipped * adv)
    actor_loss = -surrogate.mean()
    value_err = v_pred - returns
    value_loss = (value_err ** 2).mean()
    entropy = (log_std + 0.5 * (1.0 + LOG_2PI)).sum()
    losses = {
        "actor": float(actor_loss), "value": float(value_loss),
        "entropy": float(entropy),
        "total": float(actor_loss + hyper.value_coef * value_loss
                       - hyper.entropy_coef * entropy),
        "approx_kl": float(np.mean(logp_old - lp_new)),
    }

    # d(-surrogate)/d logp: active branch only; the clipped branch is
    # constant except where the clip is inactive (then both agree)
    inside = (ratio >= 1.0 - eps_clip) & (ratio <= 1.0 + eps_clip)
    coeff = np.where(unclipped_wins | inside, ratio * adv, 0.0)
    dlp = -coeff / n
    sigma2 = np.exp(2.0 * log_std)
    diff = np.asarray(actions, dtype=np.float64) - mean64
    dmean = (dlp[:, None] * diff / sigma2).astype(dt)
    dlog_std_actor = (dlp[:, None] * (diff ** 2 / sigma2 - 1.0)).sum(axis=0)
    dlog_std = dlog_std_actor - hyper.entropy_coef
    dv = (hyper.value_coef * 2.0 * value_err / n)[:, None].astype(dt)

    g_actor, dx_a = actor.backward(pp.params["actor"], c_act, dmean)
    g_critic, dx_c = critic.backward(pp.params["critic"], c_cri, dv)
    dz = (dx_a + dx_c)[:, x_ov.shape[1]:]
    g_enc, _ = enc.backward(pp.params["enc"], c_enc, dz)
    grads = {"enc": g_enc, "actor": g_actor, "critic": g_critic,
             "log_std": dlog_std.astype(dt)}
    return losses, grads


def ppo_update(pp: PolicyParams, batch: RolloutBatch, hyper: TrainHyper,
               optimizer: Adam | None = None,
               rng: np.random.Generator | None = None):
    """One PPO update over the batch; returns (params, stats).

    Advantages are normalized over the whole batch before minibatching. On a
    non-finite loss the update is abandoned and the entry parameters are
    returned untouched, with the abort recorded in the stats.
    """
    rng = rng or np.random.default_rng(0)
    if optimizer is None:
        optimizer = Adam(pp.params, hyper.learning_rate, max_grad_norm=hyper.max_grad_norm)
    backup = tree_copy(pp.params)

    ov = batch.flat(batch.proprio_velocity)
    priv = batch.flat(batch.privileged)
    acts = batch.flat(batch.actions)
    logp_old = batch.flat(batch.log_probs)
    adv = normalize_advantages(batch.flat(batch.advantages))
    rets = batch.flat(batch.returns)
    total = ov.shape[0]
    mb_size = max(total // hyper.minibatches, 1)
    lo_b, hi_b = pp.log_std_bounds

    stats = UpdateStats()
    last = {}
    for _ in range(hyper.epochs):
        perm = rng.permutation(total)
        for mb in range(hyper.minibatches):
            idx = perm[mb * mb_size:(mb + 1) * mb_size]
            if idx.size == 0:
                continue
            losses, grads = ppo_loss_and_grads(
                pp, ov[idx], priv[idx], acts[idx], logp_old[idx], adv[idx],
                rets[idx], hyper)
            if not np.isfinite(losses["total"]) or not tree_finite(grads):
                pp.params = backup
                stats.aborted = True
                stats.note = "non-finite loss or gradient; parameters restored"
                return pp, stats
            optimizer.step(pp.params, grads)
            np.clip(pp.params["log_std"], lo_b, hi_b, out=pp.params["log_std"])
            last = {"actor_loss": losses["actor"], "value_loss": losses["value"],
                    "entropy": losses["entropy"], "approx_kl": losses["approx_kl"]}

    if not tree_finite(pp.params):
        pp.params = backup
        stats.aborted = True
        stats.note = "non-finite parameters; previous values restored"
        return pp, stats
    stats.actor_loss = last.get("actor_loss", 0.0)
    stats.value_loss = last.get("value_loss", 0.0)
    stats.entropy = last.get("entropy", 0.0)
    stats.approx_kl = last.get("approx_kl", 0.0)
    return pp, stats
