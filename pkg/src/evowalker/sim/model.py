"""Walker model construction: leg-length genotype to rigid-body parameters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..config import SimCfg


class ModelError(ValueError):
    """Leg lengths or densities outside the buildable domain."""


@dataclass(frozen=True)
class LegLengths:
    """Thigh and shin lengths in meters, on the design grid."""

    thigh_m: float
    shin_m: float

    def as_tuple(self):
        return (self.thigh_m, self.shin_m)

    @property
    def total(self) -> float:
        return self.thigh_m + self.shin_m


@dataclass(frozen=True)
class PdGains:
    """Per-joint proportional and derivative gains."""

    kp: np.ndarray  # (4,) N*m/rad
    kd: np.ndarray  # (4,) N*m*s/rad


@dataclass(frozen=True)
class WalkerModel:
    """Planar 5-link biped: torso plus symmetric thigh/shin pairs with point feet.

    Leg links are uniform rods of linear density `leg_density`, so mass grows
    linearly and rotational inertia cubically with length. `link_inertia_prox`
    is taken about each rod's proximal joint; the dynamics use the
    center-of-mass values internally.
    """

    lengths: LegLengths
    torso_mass: float
    torso_length: float
    torso_inertia: float          # about the torso CoM
    leg_density: float
    thigh_mass: float
    shin_mass: float
    thigh_inertia_prox: float     # (1/3) m l^2, about the hip
    shin_inertia_prox: float      # (1/3) m l^2, about the knee
    total_mass: float
    gravity: float
    joint_position_limits: np.ndarray  # (4, 2) [lo, hi] rad: L hip, L knee, R hip, R knee
    joint_velocity_limit: float
    torque_limits: np.ndarray     # (4,) N*m
    gains: PdGains = field(repr=False, default=None)

    @property
    def nominal_standing_height(self) -> float:
        """Hip height with both legs fully extended."""
        return self.lengths.total

    @property
    def thigh_inertia_com(self) -> float:
        return self.thigh_inertia_prox - self.thigh_mass * (self.lengths.thigh_m / 2) ** 2

    @property
    def shin_inertia_com(self) -> float:
        return self.shin_inertia_prox - self.shin_mass * (self.lengths.shin_m / 2) ** 2


def build_walker(lengths: LegLengths, sim: SimCfg | None = None,
                 length_range=(0.2, 0.4)) -> WalkerModel:
    """Derive a rigid-body model from leg lengths under the uniform-density rule."""
    sim = sim or SimCfg()
    lo, hi = length_range
    for name, val in (("thigh_m", lengths.thigh_m), ("shin_m", lengths.shin_m)):
        if not (lo - 1e-9 <= val <= hi + 1e-9):
            raise ModelError(f"{name}={val} outside the design range [{lo}, {hi}]")
    if sim.leg_density <= 0:
        raise ModelError(f"leg_density={sim.leg_density} must be positive")

    lam = sim.leg_density
    thigh_mass = lam * lengths.thigh_m
    shin_mass = lam * lengths.shin_m
    model = WalkerModel(
        lengths=lengths,
        torso_mass=sim.torso_mass,
        torso_length=sim.torso_length,
        torso_inertia=sim.torso_mass * sim.torso_length ** 2 / 12.0,
        leg_density=lam,
        thigh_mass=thigh_mass,
        shin_mass=shin_mass,
        thigh_inertia_prox=thigh_mass * lengths.thigh_m ** 2 / 3.0,
        shin_inertia_prox=shin_mass * lengths.shin_m ** 2 / 3.0,
        total_mass=sim.torso_mass + 2.0 * (thigh_mass + shin_mass),
        gravity=sim.gravity,
        joint_position_limits=np.array(
            [[-sim.hip_limit, sim.hip_limit],
             [-sim.knee_limit, sim.knee_limit],
             [-sim.hip_limit, sim.hip_limit],
             [-sim.knee_limit, sim.knee_limit]], dtype=np.float64),
        joint_velocity_limit=sim.joint_velocity_limit,
        torque_limits=np.array(
            [sim.hip_torque_limit, sim.knee_torque_limit,
             sim.hip_torque_limit, sim.knee_torque_limit], dtype=np.float64),
        gains=PdGains(kp=np.full(4, sim.kp), kd=np.full(4, sim.kd)),
    )
    return model


def pd_torque(gains: PdGains, q_des, q, q_dot, limit):
    """Clamped PD law: kp*(q_des - q) - kd*q_dot, saturated at +-limit."""
    raw = gains.kp * (np.asarray(q_des) - np.asarray(q)) - gains.kd * np.asarray(q_dot)
    return np.clip(raw, -np.asarray(limit), np.asarray(limit))
