"""Generalized advantage estimation over time-major rollout arrays."""

from __future__ import annotations

import numpy as np


def compute_gae(rewards, values, dones, bootstrap_value, gamma: float, lam: float):
    """Recursive GAE with done-masked bootstrapping.

    rewards, values, dones: (T,) or (T, N) time-major; bootstrap_value is the
    critic's estimate for the state after the final step. Returns
    (advantages, returns) with returns = advantages + values elementwise.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    if rewards.shape != values.shape or rewards.shape != dones.shape:
        raise ValueError("rewards, values and dones must share a shape")
    t_len = rewards.shape[0]
    advantages = np.zeros_like(rewards)
    last_gae = np.zeros_like(rewards[0] if rewards.ndim > 1 else rewards[:1][0])
    next_value = np.asarray(bootstrap_value, dtype=np.float64)
    for t in range(t_len - 1, -1, -1):
        not_done = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * not_done - values[t]
        last_gae = delta + gamma * lam * not_done * last_gae
        advantages[t] = last_gae
        next_value = values[t]
    return advantages, advantages + values
