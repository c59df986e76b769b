"""Run configuration: dataclasses, validation, YAML loading and the default template."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import yaml


class ConfigError(ValueError):
    """Invalid run configuration; message names the offending field."""


@dataclass
class DesignSpaceCfg:
    thigh_range: tuple[float, float] = (0.2, 0.4)
    shin_range: tuple[float, float] = (0.2, 0.4)
    resolution: float = 0.01
    bits_per_gene: int = 9

    def validate(self, path="design"):
        for name, rng in (("thigh_range", self.thigh_range), ("shin_range", self.shin_range)):
            lo, hi = rng
            if not (0.0 < lo < hi):
                raise ConfigError(f"{path}.{name}: need 0 < low < high, got {rng}")
        if self.resolution <= 0:
            raise ConfigError(f"{path}.resolution: must be positive")
        if self.bits_per_gene < 1 or self.bits_per_gene > 16:
            raise ConfigError(f"{path}.bits_per_gene: must be in [1, 16]")


@dataclass
class ContactCfg:
    stiffness: float = 1.0e4       # N/m, penalty spring
    damping: float = 100.0         # N*s/m, normal damping
    friction: float = 0.8          # nominal Coulomb coefficient (randomized per episode)
    tangential_damping: float = 1000.0  # N*s/m, viscous gain clamped by the friction cone

    def validate(self, path="sim.contact"):
        if self.stiffness <= 0:
            raise ConfigError(f"{path}.stiffness: must be positive")
        if self.damping < 0:
            raise ConfigError(f"{path}.damping: must be non-negative")
        if self.friction < 0:
            raise ConfigError(f"{path}.friction: must be non-negative")
        if self.tangential_damping < 0:
            raise ConfigError(f"{path}.tangential_damping: must be non-negative")


@dataclass
class SimCfg:
    physics_dt: float = 1.0e-3
    control_substeps: int = 20     # physics steps per control step (50 Hz control)
    gravity: float = 9.81
    leg_density: float = 2.0       # kg/m, uniform linear density of thigh and shin rods
    torso_mass: float = 6.0
    torso_length: float = 0.4
    hip_limit: float = 1.5         # rad, symmetric position limit
    knee_limit: float = 1.5
    hip_torque_limit: float = 33.5   # N*m
    knee_torque_limit: float = 50.25
    joint_velocity_limit: float = 21.0  # rad/s
    kp: float = 30.0
    kd: float = 1.0
    contact: ContactCfg = field(default_factory=ContactCfg)

    def validate(self, path="sim"):
        if not (0.0 < self.physics_dt <= 0.01):
            raise ConfigError(f"{path}.physics_dt: must be in (0, 0.01]")
        if self.control_substeps < 1:
            raise ConfigError(f"{path}.control_substeps: must be >= 1")
        if self.gravity <= 0:
            raise ConfigError(f"{path}.gravity: must be positive")
        if self.leg_density <= 0:
            raise ConfigError(f"{path}.leg_density: must be positive")
        if self.torso_mass <= 0 or self.torso_length <= 0:
            raise ConfigError(f"{path}.torso_mass/torso_length: must be positive")
        for name in ("hip_limit", "knee_limit", "hip_torque_limit", "knee_torque_limit",
                     "joint_velocity_limit", "kp"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{path}.{name}: must be positive")
        if self.kd < 0:
            raise ConfigError(f"{path}.kd: must be non-negative")
        self.contact.validate(f"{path}.contact")


@dataclass
class RewardWeights:
    task: float = 1.0
    torque: float = -1.0e-4
    action_rate: float = -0.01
    pitch: float = -0.5
    height: float = -1.0
    joint_limit: float = -1.0
    alive: float = 0.2

    def as_dict(self):
        return dataclasses.asdict(self)

    def validate(self, path="env.reward_weights"):
        if self.alive < 0:
            raise ConfigError(f"{path}.alive: must be non-negative")


@dataclass
class EnvCfg:
    episode_s: float = 20.0
    command_resample_s: float = 5.0
    command_range: tuple[float, float] = (0.0, 1.5)   # m/s forward
    push_interval_s: float = 5.0
    push_jitter_s: float = 0.5
    push_magnitude: tuple[float, float] = (2.0, 6.0)  # kg*m/s, sign drawn separately
    friction_range: tuple[float, float] = (0.4, 1.0)
    mass_offset_range: tuple[float, float] = (-0.5, 0.5)  # kg added to the torso
    init_angle_jitter: float = 0.05   # rad
    init_velocity_jitter: float = 0.1  # rad/s
    stance_hip_split: float = 0.1     # rad, resting fore/aft leg split
    gait_period_s: float = 0.8
    tracking_sigma: float = 0.25      # m/s, width of the velocity-tracking kernel
    height_target_frac: float = 0.9   # of nominal standing hip height
    soft_limit_frac: float = 0.9      # of the joint position limit
    termination_height_frac: float = 0.4
    termination_pitch: float = 1.0    # rad
    failure_penalty: float = -10.0    # added once when simulation diverges
    reward_weights: RewardWeights = field(default_factory=RewardWeights)

    def validate(self, path="env"):
        if self.episode_s <= 0:
            raise ConfigError(f"{path}.episode_s: must be positive")
        if self.command_resample_s <= 0 or self.push_interval_s <= 0:
            raise ConfigError(f"{path}.command_resample_s/push_interval_s: must be positive")
        if self.push_jitter_s < 0:
            raise ConfigError(f"{path}.push_jitter_s: must be non-negative")
        for name in ("command_range", "push_magnitude", "friction_range", "mass_offset_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ConfigError(f"{path}.{name}: low must not exceed high")
        if self.command_range[0] < 0:
            raise ConfigError(f"{path}.command_range: commands are forward-only (low >= 0)")
        if not (0 < self.friction_range[0]):
            raise ConfigError(f"{path}.friction_range: must be positive")
        if self.tracking_sigma <= 0:
            raise ConfigError(f"{path}.tracking_sigma: must be positive")
        for name in ("height_target_frac", "soft_limit_frac", "termination_height_frac"):
            v = getattr(self, name)
            if not (0 < v <= 1):
                raise ConfigError(f"{path}.{name}: must be in (0, 1]")
        if self.termination_pitch <= 0:
            raise ConfigError(f"{path}.termination_pitch: must be positive")
        if self.gait_period_s <= 0:
            raise ConfigError(f"{path}.gait_period_s: must be positive")
        self.reward_weights.validate(f"{path}.reward_weights")


@dataclass
class TrainHyper:
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip_ratio: float = 0.2
    learning_rate: float = 3.0e-4
    epochs: int = 5
    minibatches: int = 4
    entropy_coef: float = 0.005
    value_coef: float = 0.5
    num_envs: int = 64
    steps_per_iteration: int = 96
    hidden_sizes: tuple[int, int] = (256, 128)
    latent_dim: int = 8
    encoder_hidden: int = 32
    gru_hidden: int = 64
    summary_dim: int = 8
    log_std_init: float = -1.0
    log_std_bounds: tuple[float, float] = (-4.0, 1.0)
    max_grad_norm: float = 1.0
    pretrain_iterations: int = 500
    distill_updates: int = 300
    distill_epochs: int = 4         # gradient passes per collected window
    distill_learning_rate: float = 1.0e-3
    distill_velocity_weight: float = 1.0
    dtype: str = "float32"

    def validate(self, path="train"):
        if not (0 < self.gamma <= 1):
            raise ConfigError(f"{path}.gamma: must be in (0, 1]")
        if not (0 < self.gae_lambda <= 1):
            raise ConfigError(f"{path}.gae_lambda: must be in (0, 1]")
        if self.clip_ratio <= 0:
            raise ConfigError(f"{path}.clip_ratio: must be positive")
        if self.learning_rate <= 0 or self.distill_learning_rate <= 0:
            raise ConfigError(f"{path}.learning_rate: must be positive")
        for name in ("epochs", "minibatches", "num_envs", "steps_per_iteration",
                     "latent_dim", "encoder_hidden", "gru_hidden", "summary_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{path}.{name}: must be >= 1")
        if self.entropy_coef < 0 or self.value_coef < 0:
            raise ConfigError(f"{path}.entropy_coef/value_coef: must be non-negative")
        if self.pretrain_iterations < 0 or self.distill_updates < 0:
            raise ConfigError(f"{path}.pretrain_iterations/distill_updates: must be >= 0")
        if self.distill_epochs < 1:
            raise ConfigError(f"{path}.distill_epochs: must be >= 1")
        if self.log_std_bounds[0] > self.log_std_bounds[1]:
            raise ConfigError(f"{path}.log_std_bounds: low must not exceed high")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"{path}.dtype: must be float32 or float64")


@dataclass
class EvoHyper:
    population_size: int = 250
    crossover_prob: float = 0.8
    mutation_prob: float = 0.03
    generations: int = 50
    policy_iters_per_gen: int = 10
    fitness_epsilon: float = 0.01
    convergence_variance_threshold: float = 0.0  # 0 disables the early stop
    elitism: bool = True
    fitness_mode: str = "rl"        # "rl" or "synthetic"
    synthetic_optimum: tuple[float, float] = (0.31, 0.36)
    cold_start: bool = False        # skip the shared warm start (ablation)

    def validate(self, path="evo"):
        if self.population_size < 1:
            raise ConfigError(f"{path}.population_size: must be >= 1")
        for name in ("crossover_prob", "mutation_prob"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ConfigError(f"{path}.{name}: must be in [0, 1]")
        if self.generations < 1:
            raise ConfigError(f"{path}.generations: must be >= 1")
        if self.policy_iters_per_gen < 1:
            raise ConfigError(f"{path}.policy_iters_per_gen: must be >= 1")
        if self.fitness_epsilon <= 0:
            raise ConfigError(f"{path}.fitness_epsilon: must be positive")
        if self.convergence_variance_threshold < 0:
            raise ConfigError(f"{path}.convergence_variance_threshold: must be >= 0")
        if self.fitness_mode not in ("rl", "synthetic"):
            raise ConfigError(f"{path}.fitness_mode: must be 'rl' or 'synthetic'")


@dataclass
class SweepCfg:
    thigh_values: tuple[float, ...] = (0.20, 0.25, 0.30, 0.35)
    shin_values: tuple[float, ...] = (0.20, 0.25, 0.30, 0.35)

    def validate(self, path="sweep"):
        if not self.thigh_values or not self.shin_values:
            raise ConfigError(f"{path}: grids must be non-empty")


@dataclass
class RunConfig:
    task: str = "comprehensive"     # "comprehensive" or "max_velocity"
    master_seed: int = 0
    workers: int = 0                # 0 means use all available cores
    morphology: tuple[float, float] = (0.30, 0.30)  # (thigh_m, shin_m) for pretrain/distill/eval
    eval_episodes: int = 5
    design: DesignSpaceCfg = field(default_factory=DesignSpaceCfg)
    sim: SimCfg = field(default_factory=SimCfg)
    env: EnvCfg = field(default_factory=EnvCfg)
    train: TrainHyper = field(default_factory=TrainHyper)
    evo: EvoHyper = field(default_factory=EvoHyper)
    sweep: SweepCfg = field(default_factory=SweepCfg)

    def validate(self):
        if self.task not in ("comprehensive", "max_velocity"):
            raise ConfigError("task: must be 'comprehensive' or 'max_velocity'")
        if self.master_seed < 0:
            raise ConfigError("master_seed: must be non-negative")
        if self.workers < 0:
            raise ConfigError("workers: must be >= 0")
        if self.eval_episodes < 0:
            raise ConfigError("eval_episodes: must be >= 0")
        t, s = self.morphology
        self.design.validate()
        lo_t, hi_t = self.design.thigh_range
        lo_s, hi_s = self.design.shin_range
        if not (lo_t <= t <= hi_t and lo_s <= s <= hi_s):
            raise ConfigError(f"morphology: ({t}, {s}) outside the design ranges")
        self.sim.validate()
        self.env.validate()
        self.train.validate()
        self.evo.validate()
        self.sweep.validate()
        for name, vals in (("thigh_values", self.sweep.thigh_values),
                           ("shin_values", self.sweep.shin_values)):
            for v in vals:
                if _off_grid(v, self.design):
                    raise ConfigError(f"sweep.{name}: {v} not on the {self.design.resolution} m grid "
                                      f"inside the design range")
        return self

    @property
    def control_dt(self) -> float:
        return self.sim.physics_dt * self.sim.control_substeps

    @property
    def episode_steps(self) -> int:
        return int(round(self.env.episode_s / self.control_dt))

    def effective_workers(self) -> int:
        return self.workers if self.workers > 0 else (os.cpu_count() or 1)


def _off_grid(v, design: DesignSpaceCfg) -> bool:
    lo, hi = min(design.thigh_range[0], design.shin_range[0]), max(design.thigh_range[1], design.shin_range[1])
    if not (lo - 1e-9 <= v <= hi + 1e-9):
        return True
    steps = v / design.resolution
    return abs(steps - round(steps)) > 1e-6


# ---------------------------------------------------------------------------
# dict <-> dataclass with unknown-key rejection
# ---------------------------------------------------------------------------

_TUPLE_FIELDS = {
    "thigh_range", "shin_range", "command_range", "push_magnitude", "friction_range",
    "mass_offset_range", "hidden_sizes", "log_std_bounds", "morphology",
    "synthetic_optimum", "thigh_values", "shin_values",
}


def _from_dict(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected a mapping, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        f = fields[name]
        sub = f"{path}.{name}" if path else name
        if dataclasses.is_dataclass(f.type) or (isinstance(f.type, str) and f.type in _NESTED):
            kwargs[name] = _from_dict(_NESTED[f.type if isinstance(f.type, str) else f.type.__name__], value, sub)
        elif name in _TUPLE_FIELDS:
            if not isinstance(value, (list, tuple)):
                raise ConfigError(f"{sub}: expected a list")
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    return cls(**kwargs)


_NESTED = {
    "DesignSpaceCfg": DesignSpaceCfg, "ContactCfg": ContactCfg, "SimCfg": SimCfg,
    "RewardWeights": RewardWeights, "EnvCfg": EnvCfg, "TrainHyper": TrainHyper,
    "EvoHyper": EvoHyper, "SweepCfg": SweepCfg,
}


def config_from_dict(data: dict) -> RunConfig:
    cfg = _from_dict(RunConfig, data or {}, "")
    cfg.validate()
    return cfg


def config_to_dict(cfg: RunConfig) -> dict:
    d = dataclasses.asdict(cfg)

    def tuplify(x):
        if isinstance(x, tuple):
            return list(x)
        if isinstance(x, dict):
            return {k: tuplify(v) for k, v in x.items()}
        return x

    return tuplify(d)


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}")
    return config_from_dict(data or {})


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


DEFAULT_CONFIG_TEXT = """\
# evowalker run configuration (defaults shown; every key is optional)

task: comprehensive          # comprehensive | max_velocity
master_seed: 0
workers: 0                   # 0 = all available cores
morphology: [0.30, 0.30]     # thigh_m, shin_m used by pretrain/distill/eval
eval_episodes: 5

design:
  thigh_range: [0.2, 0.4]    # m
  shin_range: [0.2, 0.4]     # m
  resolution: 0.01           # m, decoded lengths snap to this grid
  bits_per_gene: 9           # bits per leg-length gene

evo:
  population_size: 250
  crossover_prob: 0.8
  mutation_prob: 0.03
  generations: 50
  policy_iters_per_gen: 10   # policy iterations each individual trains per generation
  fitness_epsilon: 0.01      # shift added so fitness stays strictly positive
  convergence_variance_threshold: 0.0   # 0 disables the early stop
  elitism: true
  fitness_mode: rl           # rl | synthetic (closed-form landscape, no training)
  synthetic_optimum: [0.31, 0.36]
  cold_start: false          # true skips the shared warm start

train:
  gamma: 0.99
  gae_lambda: 0.95
  clip_ratio: 0.2
  learning_rate: 0.0003
  epochs: 5
  minibatches: 4
  entropy_coef: 0.005
  value_coef: 0.5
  num_envs: 64
  steps_per_iteration: 96
  hidden_sizes: [256, 128]
  latent_dim: 8
  encoder_hidden: 32
  gru_hidden: 64
  summary_dim: 8
  log_std_init: -1.0
  log_std_bounds: [-4.0, 1.0]
  max_grad_norm: 1.0
  pretrain_iterations: 500
  distill_updates: 300
  distill_epochs: 4
  distill_learning_rate: 0.001
  distill_velocity_weight: 1.0
  dtype: float32

sim:
  physics_dt: 0.001          # s
  control_substeps: 20       # physics steps per control step (50 Hz control)
  gravity: 9.81
  leg_density: 2.0           # kg/m, uniform rod density for thigh and shin
  torso_mass: 6.0            # kg
  torso_length: 0.4          # m
  hip_limit: 1.5             # rad
  knee_limit: 1.5            # rad
  hip_torque_limit: 33.5     # N*m
  knee_torque_limit: 50.25   # N*m
  joint_velocity_limit: 21.0 # rad/s
  kp: 30.0                   # N*m/rad
  kd: 1.0                    # N*m*s/rad
  contact:
    stiffness: 10000.0       # N/m
    damping: 100.0           # N*s/m
    friction: 0.8
    tangential_damping: 1000.0

env:
  episode_s: 20.0
  command_resample_s: 5.0    # piecewise-constant command hold time
  command_range: [0.0, 1.5]  # m/s
  push_interval_s: 5.0       # spacing of scheduled horizontal pushes
  push_jitter_s: 0.5
  push_magnitude: [2.0, 6.0] # kg*m/s
  friction_range: [0.4, 1.0]
  mass_offset_range: [-0.5, 0.5]  # kg on the torso
  init_angle_jitter: 0.05
  init_velocity_jitter: 0.1
  stance_hip_split: 0.1
  gait_period_s: 0.8
  tracking_sigma: 0.25
  height_target_frac: 0.9
  soft_limit_frac: 0.9
  termination_height_frac: 0.4
  termination_pitch: 1.0
  failure_penalty: -10.0
  reward_weights:
    task: 1.0
    torque: -0.0001
    action_rate: -0.01
    pitch: -0.5
    height: -1.0
    joint_limit: -1.0
    alive: 0.2

sweep:
  thigh_values: [0.20, 0.25, 0.30, 0.35]
  shin_values: [0.20, 0.25, 0.30, 0.35]
"""


def default_config() -> RunConfig:
    return RunConfig().validate()
