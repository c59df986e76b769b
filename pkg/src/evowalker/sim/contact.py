"""Penalty ground contact: spring-damper normal force, friction-cone tangential."""

from __future__ import annotations

import numpy as np

from ..config import ContactCfg


def friction_clamp(demand, normal_force, mu):
    """Clamp a tangential force demand into the Coulomb cone |f_t| <= mu * f_n."""
    cap = np.asarray(mu) * np.asarray(normal_force)
    return np.clip(demand, -cap, cap)


def penalty_contact(foot_pos, foot_vel, cfg: ContactCfg, mu):
    """Per-foot ground reaction forces for flat ground at height zero.

    foot_pos, foot_vel: (..., 2) world position and velocity, z up.
    Returns (forces (..., [fx, fz]), active mask). The normal force is never
    negative; the tangential force is viscous, clamped into the friction cone.
    """
    foot_pos = np.asarray(foot_pos, dtype=np.float64)
    foot_vel = np.asarray(foot_vel, dtype=np.float64)
    penetration = -foot_pos[..., 1]
    active = penetration > 0.0
    fn = cfg.stiffness * penetration - cfg.damping * foot_vel[..., 1]
    fn = np.where(active, np.maximum(fn, 0.0), 0.0)
    mu = np.asarray(mu, dtype=np.float64)
    if mu.ndim == 1 and fn.ndim == 2:
        mu = mu[:, None]
    ft = friction_clamp(-cfg.tangential_damping * foot_vel[..., 0] * active, fn, mu)
    return np.stack((ft, fn), axis=-1), active


def contact_forces(dynamics, state, cfg: ContactCfg | None = None, mu=None):
    """Forces at both feet for the given state, (n, 2 feet, [fx, fz])."""
    cfg = cfg or dynamics.contact_cfg
    if cfg.stiffness <= 0:
        raise ValueError("contact stiffness must be positive")
    if cfg.damping < 0:
        raise ValueError("contact damping must be non-negative")
    if mu is not None and np.any(np.asarray(mu) < 0):
        raise ValueError("friction coefficient must be non-negative")
    pos, vel = dynamics.foot_kinematics(state)
    forces, _ = penalty_contact(pos, vel, cfg, cfg.friction if mu is None else mu)
    return forces
