"""Phase-1 actor-critic with a privileged encoder feeding both heads."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import TrainHyper
from ..env.observation import (PRIVILEGED_DIM, STRUCTURE_DIM, VELOCITY_DIM, Observation,
                               proprio_dim)
from ..env.rewards import TASK_COMPREHENSIVE
from .nets import MLP

LOG_2PI = float(np.log(2.0 * np.pi))


class PolicyConfigError(ValueError):
    """Observation layout does not match the policy parameters."""


def proprio_scales(task: str) -> np.ndarray:
    """Fixed input scaling: joint velocities and pitch rate are damped."""
    s = [1.0] * 4 + [0.1] * 4 + [1.0, 0.25] + [1.0] * 4 + [1.0, 1.0]
    if task == TASK_COMPREHENSIVE:
        s.append(1.0)
    return np.array(s)


PRIVILEGED_SCALES = np.array([1.0, 1.0, 0.2, 0.2])


@dataclass
class PolicyParams:
    """Weights plus the layout they were built for.

    params keys: "enc" (privileged encoder), "actor", "critic", "log_std".
    """

    task: str
    num_actions: int
    params: dict
    hidden_sizes: tuple
    latent_dim: int
    encoder_hidden: int
    log_std_bounds: tuple
    dtype: str = "float32"
    morphology: tuple | None = None
    # dimension overrides for reduced test policies; None follows the task layout
    ov_dim: int | None = None
    priv_dim: int | None = None
    extra: dict = field(default_factory=dict)

    @property
    def input_dims(self) -> tuple[int, int]:
        ov = self.ov_dim if self.ov_dim is not None else \
            proprio_dim(self.task) + VELOCITY_DIM
        priv = self.priv_dim if self.priv_dim is not None else \
            PRIVILEGED_DIM + STRUCTURE_DIM
        return ov, priv

    def nets(self):
        dt = np.dtype(self.dtype)
        ov, priv = self.input_dims
        d_in = ov + self.latent_dim
        actor = MLP((d_in, *self.hidden_sizes, self.num_actions), dtype=dt, final_scale=0.01)
        critic = MLP((d_in, *self.hidden_sizes, 1), dtype=dt)
        enc = MLP((priv, self.encoder_hidden, self.latent_dim), dtype=dt)
        return enc, actor, critic

    def copy(self) -> "PolicyParams":
        from .nets import tree_copy
        return PolicyParams(self.task, self.num_actions, tree_copy(self.params),
                            self.hidden_sizes, self.latent_dim, self.encoder_hidden,
                            self.log_std_bounds, self.dtype, self.morphology,
                            self.ov_dim, self.priv_dim, dict(self.extra))


def init_policy(task: str, hyper: TrainHyper, rng, num_actions: int = 4,
                morphology=None) -> PolicyParams:
    pp = PolicyParams(
        task=task, num_actions=num_actions, params={},
        hidden_sizes=tuple(hyper.hidden_sizes), latent_dim=hyper.latent_dim,
        encoder_hidden=hyper.encoder_hidden, log_std_bounds=tuple(hyper.log_std_bounds),
        dtype=hyper.dtype, morphology=morphology)
    enc, actor, critic = pp.nets()
    pp.params = {
        "enc": enc.init(rng),
        "actor": actor.init(rng),
        "critic": critic.init(rng),
        "log_std": np.full(num_actions, hyper.log_std_init, dtype=np.dtype(hyper.dtype)),
    }
    return pp


def scaled_inputs(pp: PolicyParams, obs: Observation):
    """Split a teacher observation into scaled (proprio+velocity, privileged+structure)."""
    d_p = proprio_dim(pp.task)
    if obs.proprio.shape[1] != d_p:
        raise PolicyConfigError(
            f"proprio dim {obs.proprio.shape[1]} != expected {d_p} for task {pp.task!r}")
    if obs.velocity is None or obs.privileged is None or obs.structure is None:
        raise PolicyConfigError("teacher policy needs a phase-1 observation")
    ov = np.concatenate([obs.proprio * proprio_scales(pp.task)[None, :],
                         obs.velocity], axis=1)
    priv = np.concatenate([obs.privileged * PRIVILEGED_SCALES[None, :],
                           obs.structure], axis=1)
    return ov, priv


def encode_privileged(pp: PolicyParams, privileged, structure):
    """Latent encoding of privileged plus structural inputs."""
    enc = pp.nets()[0]
    x = np.concatenate([np.asarray(privileged) * PRIVILEGED_SCALES[None, :],
                        np.asarray(structure)], axis=1)
    z, _ = enc.forward(pp.params["enc"], x)
    return z


def log_std_clipped(pp: PolicyParams):
    lo, hi = pp.log_std_bounds
    return np.clip(pp.params["log_std"].astype(np.float64), lo, hi)


def gaussian_logp(actions, mean, log_std):
    """Diagonal Gaussian log density, computed in float64."""
    a = np.asarray(actions, dtype=np.float64)
    m = np.asarray(mean, dtype=np.float64)
    ls = np.asarray(log_std, dtype=np.float64)
    zs = (a - m) / np.exp(ls)
    return (-0.5 * zs ** 2 - ls - 0.5 * LOG_2PI).sum(axis=-1)


def policy_forward(pp: PolicyParams, obs: Observation, deterministic: bool = False,
                   rng: np.random.Generator | None = None):
    """Action and its log probability; `deterministic` returns the mean."""
    enc, actor, _ = pp.nets()
    ov, priv = scaled_inputs(pp, obs)
    z, _ = enc.forward(pp.params["enc"], priv)
    x = np.concatenate([ov.astype(z.dtype), z], axis=1)
    mean, _ = actor.forward(pp.params["actor"], x)
    mean64 = mean.astype(np.float64)
    log_std = log_std_clipped(pp)
    if deterministic:
        return mean64, gaussian_logp(mean64, mean64, log_std)
    if rng is None:
        raise ValueError("sampling requires an rng")
    eps = rng.standard_normal(mean64.shape)
    action = mean64 + np.exp(log_std) * eps
    return action, gaussian_logp(action, mean64, log_std)


def value_forward(pp: PolicyParams, obs: Observation):
    enc, _, critic = pp.nets()
    ov, priv = scaled_inputs(pp, obs)
    z, _ = enc.forward(pp.params["enc"], priv)
    x = np.concatenate([ov.astype(z.dtype), z], axis=1)
    v, _ = critic.forward(pp.params["critic"], x)
    return v[:, 0].astype(np.float64)


def policy_entropy(pp: PolicyParams) -> float:
    """Entropy of the diagonal Gaussian head (state independent)."""
    ls = log_std_clipped(pp)
    return float((ls + 0.5 * (1.0 + LOG_2PI)).sum())
