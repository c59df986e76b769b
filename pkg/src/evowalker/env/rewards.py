"""Step reward: task term plus regularizers, reported as a full breakdown."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import EnvCfg

TASK_COMPREHENSIVE = "comprehensive"
TASK_MAX_VELOCITY = "max_velocity"

TERM_NAMES = ("task", "torque", "action_rate", "pitch", "height", "joint_limit", "alive")


@dataclass
class RewardBreakdown:
    """Raw term values, their weights, and the weighted sum.

    Vectorized: each term is an (n,) array. `total` is computed as the exact
    weighted sum of the stored terms.
    """

    terms: dict
    weights: dict
    total: np.ndarray

    @classmethod
    def weighted(cls, terms: dict, weights: dict) -> "RewardBreakdown":
        total = sum(weights[k] * np.asarray(terms[k]) for k in terms)
        return cls(terms=terms, weights=weights, total=total)


def tracking_term(vx, command, sigma):
    """exp(-(vx - cmd)^2 / sigma^2); equals 1 exactly at perfect tracking."""
    err = np.asarray(vx) - np.asarray(command)
    return np.exp(-(err ** 2) / sigma ** 2)


def compute_reward(task: str, cfg: EnvCfg, *, vx, command, torque_sq_sum, action,
                   prev_action, pitch, hip_height, nominal_height, joints,
                   joint_limits, failed) -> RewardBreakdown:
    """Reward breakdown for one control step across the batch.

    torque_sq_sum: sum over joints of tau^2, already averaged over substeps.
    failed: envs that terminated by falling or divergence this step; they
    lose the alive bonus.
    """
    if task == TASK_COMPREHENSIVE:
        task_term = tracking_term(vx, command, cfg.tracking_sigma)
    elif task == TASK_MAX_VELOCITY:
        task_term = np.asarray(vx, dtype=np.float64).copy()
    else:
        raise ValueError(f"unknown task {task!r}")

    action = np.asarray(action)
    prev_action = np.asarray(prev_action)
    height_target = cfg.height_target_frac * np.asarray(nominal_height)
    soft = cfg.soft_limit_frac * joint_limits[:, 1]  # symmetric limits
    excess = np.maximum(np.abs(joints) - soft, 0.0)

    terms = {
        "task": task_term,
        "torque": np.asarray(torque_sq_sum, dtype=np.float64),
        "action_rate": ((action - prev_action) ** 2).sum(axis=-1),
        "pitch": np.asarray(pitch) ** 2,
        "height": (np.asarray(hip_height) - height_target) ** 2,
        "joint_limit": (excess ** 2).sum(axis=-1),
        "alive": np.where(np.asarray(failed), 0.0, 1.0),
    }
    return RewardBreakdown.weighted(terms, cfg.reward_weights.as_dict())
