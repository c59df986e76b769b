"""Vectorized planar rigid-body dynamics for the 5-link walker.

Minimal-coordinate Lagrangian formulation over a batch of environments.
Generalized coordinates per walker: (x_c, z_c, pitch, L hip, L knee, R hip,
R knee) where (x_c, z_c) is the center of mass of the whole robot. Using the
CoM as the floating base decouples translation exactly: internal motion can
never change linear momentum, so ballistic flight conserves horizontal
momentum to machine precision instead of integrator order.

A pinned mode fixes the hip point in space and drops the translational
degrees of freedom, which turns the passive walker into a gravity
multi-pendulum; that mode backs the energy-conservation diagnostics.

Each body CoM sits at a fixed linear combination of rod-direction unit
vectors u(alpha_k), so Jacobians and velocity-product terms reduce to batched
matmuls against small per-model coefficient matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import ContactCfg
from .contact import penalty_contact
from .model import WalkerModel, pd_torque

NUM_Q = 7          # x_c, z_c, pitch, L hip, L knee, R hip, R knee
NUM_JOINTS = 4
_ANG = slice(2, 7)  # angular coordinates (pitch + joints)

# rod angles: torso, L thigh, L shin, R thigh, R shin
# each is a fixed linear combination of the angular coordinates plus an offset
_W = np.array([
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 0.0, 0.0, 0.0],
    [1.0, 1.0, 1.0, 0.0, 0.0],
    [1.0, 0.0, 0.0, 1.0, 0.0],
    [1.0, 0.0, 0.0, 1.0, 1.0],
])
_WT = np.ascontiguousarray(_W.T)
_ALPHA0 = np.array([np.pi / 2, -np.pi / 2, -np.pi / 2, -np.pi / 2, -np.pi / 2])


class SimulationDiverged(RuntimeError):
    """A state component became non-finite during integration."""

    def __init__(self, quantity: str, value):
        super().__init__(f"simulation diverged: non-finite {quantity} = {value}")
        self.quantity = quantity
        self.value = value


@dataclass
class SimState:
    """Batched simulator state.

    `q` columns: base x, base z (robot center of mass), torso pitch, then the
    four joint angles (L hip, L knee, R hip, R knee). `qd` matches. Contact
    fields hold the most recent per-foot forces (N, 2 feet, [fx, fz]).
    """

    q: np.ndarray
    qd: np.ndarray
    time: float = 0.0
    contact_forces: np.ndarray = None
    contact_active: np.ndarray = None

    def copy(self) -> "SimState":
        return SimState(self.q.copy(), self.qd.copy(), self.time,
                        None if self.contact_forces is None else self.contact_forces.copy(),
                        None if self.contact_active is None else self.contact_active.copy())


class WalkerDynamics:
    """Batched stepper; one instance owns the model arrays for `num_envs` walkers."""

    def __init__(self, model: WalkerModel, num_envs: int = 1, pinned: bool = False,
                 contact: ContactCfg | None = None):
        self.num_envs = num_envs
        self.pinned = pinned
        self.contact_cfg = contact or ContactCfg()
        n = num_envs
        self._lengths = np.zeros((n, 2))
        self._masses = np.zeros((n, 5))
        self._inertias = np.zeros((n, 5))
        self._coeff = np.zeros((n, 5, 5))   # body CoM = sum_k coeff[b, k] * u(alpha_k)
        self._foot_coeff = np.zeros((n, 2, 5))
        self.total_mass = np.ones(n)
        self.gravity = model.gravity
        self.joint_limits = model.joint_position_limits
        self.torque_limits = model.torque_limits
        self.gains = model.gains
        self.models = [model] * n
        for i in range(n):
            self.set_model(i, model)

    def set_model(self, i: int, model: WalkerModel, torso_mass_offset: float = 0.0):
        """(Re)bind env row i to a walker model, optionally with extra torso mass."""
        lt, ls = model.lengths.thigh_m, model.lengths.shin_m
        self.models[i] = model
        self._lengths[i] = (lt, ls)
        m_torso = model.torso_mass + torso_mass_offset
        self._masses[i] = (m_torso, model.thigh_mass, model.shin_mass,
                           model.thigh_mass, model.shin_mass)
        self._inertias[i] = (model.torso_inertia,
                             model.thigh_inertia_com, model.shin_inertia_com,
                             model.thigh_inertia_com, model.shin_inertia_com)
        c = self._coeff[i]
        c[:] = 0.0
        c[0, 0] = model.torso_length / 2.0
        c[1, 1] = lt / 2.0
        c[2, 1] = lt
        c[2, 2] = ls / 2.0
        c[3, 3] = lt / 2.0
        c[4, 3] = lt
        c[4, 4] = ls / 2.0
        f = self._foot_coeff[i]
        f[:] = 0.0
        f[0, 1] = lt
        f[0, 2] = ls
        f[1, 3] = lt
        f[1, 4] = ls
        self.total_mass[i] = self._masses[i].sum()
        self._refresh_cache()

    def _refresh_cache(self):
        self._mass_frac = self._masses / self.total_mass[:, None]
        self._mass_col = self._masses[:, :, None]
        # constant rotational part of the angular mass matrix
        self._m_rot = np.einsum("nb,bd,be->nde", self._inertias, _W, _W)

    # -- kinematics ---------------------------------------------------------

    def _trig(self, q_ang):
        """Rod direction vectors u(alpha) and their derivatives u'(alpha)."""
        alpha = q_ang @ _WT + _ALPHA0
        ca, sa = np.cos(alpha), np.sin(alpha)
        u = np.stack((ca, sa), axis=-1)          # (n, 5, 2)
        up = np.stack((-sa, ca), axis=-1)
        return u, up

    def _jac(self, up):
        """Body-CoM Jacobians wrt the angular coordinates, as (n, 5, 2*5)."""
        n = up.shape[0]
        g = (up[:, :, :, None] * _W[:, None, :]).reshape(n, 5, 10)
        return self._coeff @ g, g               # (n, 5 bodies, 10), rod basis

    def hip_offset(self, q_ang, u=None):
        """Vector from the hip point to the robot CoM, per env (n, 2)."""
        if u is None:
            u, _ = self._trig(q_ang)
        rho = self._coeff @ u
        return (self._mass_frac[:, None, :] @ rho)[:, 0]

    def hip_position(self, q):
        """World hip-point position (n, 2)."""
        if self.pinned:
            return q[:, 0:2].copy()
        return q[:, 0:2] - self.hip_offset(q[:, _ANG])

    def foot_positions(self, q):
        """World foot positions (n, 2 feet, 2)."""
        u, _ = self._trig(q[:, _ANG])
        rho_f = self._foot_coeff @ u
        return self.hip_position(q)[:, None, :] + rho_f

    def foot_kinematics(self, state: SimState):
        """World foot positions and velocities, each (n, 2 feet, 2)."""
        q, qd = state.q, state.qd
        n = self.num_envs
        u, up = self._trig(q[:, _ANG])
        j_rho, g = self._jac(up)
        rho_f = self._foot_coeff @ u
        j_f = (self._foot_coeff @ g).reshape(n, 2, 2, 5)
        v_ang = qd[:, _ANG]
        if self.pinned:
            pos = q[:, None, 0:2] + rho_f
            vel = j_f @ v_ang[:, None, :, None]
            return pos, vel[..., 0]
        s = (self._mass_frac[:, None, :] @ (self._coeff @ u))[:, 0]
        j_s = (self._mass_frac[:, None, :] @ j_rho).reshape(n, 1, 2, 5)
        pos = q[:, None, 0:2] + rho_f - s[:, None]
        vel = qd[:, None, 0:2] + ((j_f - j_s) @ v_ang[:, None, :, None])[..., 0]
        return pos, vel

    def torso_velocity(self, q, qd):
        """World linear velocity of the torso CoM (n, 2)."""
        n = self.num_envs
        u, up = self._trig(q[:, _ANG])
        j_rho, _ = self._jac(up)
        j_tor = j_rho[:, 0].reshape(n, 2, 5)
        v_ang = qd[:, _ANG, None]
        if self.pinned:
            return (j_tor @ v_ang)[..., 0]
        j_s = (self._mass_frac[:, None, :] @ j_rho).reshape(n, 2, 5)
        return qd[:, 0:2] + ((j_tor - j_s) @ v_ang)[..., 0]

    def state_from_hip_pose(self, hip_xz, pitch, joints, joint_vel=None,
                            base_vel=None, pitch_rate=None) -> SimState:
        """Assemble a batched state from hip-frame quantities."""
        n = self.num_envs
        q = np.zeros((n, NUM_Q))
        qd = np.zeros((n, NUM_Q))
        q[:, 2] = pitch
        q[:, 3:7] = joints
        if self.pinned:
            q[:, 0:2] = hip_xz
        else:
            q[:, 0:2] = hip_xz + self.hip_offset(q[:, _ANG])
        if joint_vel is not None:
            qd[:, 3:7] = joint_vel
        if pitch_rate is not None:
            qd[:, 2] = pitch_rate
        if base_vel is not None and not self.pinned:
            qd[:, 0:2] = base_vel
        return SimState(q=q, qd=qd)

    # -- dynamics -----------------------------------------------------------

    def angular_mass_matrix(self, q):
        n = self.num_envs
        _, up = self._trig(q[:, _ANG])
        j_rho, _ = self._jac(up)
        if not self.pinned:
            j_rho = j_rho - self._mass_frac[:, None, :] @ j_rho
        a = j_rho.reshape(n, 10, 5)
        return (self._mass_col * j_rho).reshape(n, 10, 5).transpose(0, 2, 1) @ a + self._m_rot

    def step(self, state: SimState, torques, dt: float,
             contact_enabled: bool = True, friction=None) -> SimState:
        """One semi-implicit Euler step; returns the successor state.

        Raises SimulationDiverged if any env holds a non-finite value on
        entry; vectorized callers that prefer masks use step_masked.
        """
        new_state, bad = self.step_masked(state, torques, dt, contact_enabled, friction)
        if bad.any():
            i = int(np.argmax(bad))
            if not np.isfinite(state.q[i]).all():
                raise SimulationDiverged(f"q[env {i}]", state.q[i])
            raise SimulationDiverged(f"qd[env {i}]", state.qd[i])
        return new_state

    def step_masked(self, state: SimState, torques, dt: float,
                    contact_enabled: bool = True, friction=None):
        """Like step, but freezes non-finite envs and returns their mask."""
        q, qd = state.q, state.qd
        n = self.num_envs
        bad = ~(np.isfinite(q).all(axis=1) & np.isfinite(qd).all(axis=1))
        if bad.any():
            q = np.where(bad[:, None], 0.0, q)
            qd = np.where(bad[:, None], 0.0, qd)

        q_ang, v_ang = q[:, _ANG], qd[:, _ANG]
        u, up = self._trig(q_ang)
        j_rho, g = self._jac(up)                 # (n, 5, 10)
        ad2 = (v_ang @ _WT) ** 2
        ab = -(self._coeff @ (u * ad2[:, :, None]))  # (n, 5, 2) rod bias accelerations
        if not self.pinned:
            frac = self._mass_frac[:, None, :]
            j_rho = j_rho - frac @ j_rho
            ab = ab - frac @ ab
        jw = (self._mass_col * j_rho).reshape(n, 10, 5)
        jt = jw.transpose(0, 2, 1)               # (n, 5, 10) mass-weighted Jacobian
        a = j_rho.reshape(n, 10, 5)
        m_ang = jt @ a + self._m_rot
        rhs = -(jt @ ab.reshape(n, 10, 1))[..., 0]
        rhs[:, 1:5] += torques

        forces = np.zeros((n, 2, 2))
        active = np.zeros((n, 2), dtype=bool)
        base_force = None
        if self.pinned:
            # gravity torque about the pin; in the free CoM coordinates gravity
            # is purely translational and never enters the angular block
            rhs -= self.gravity * (self._masses[:, None, :]
                                   @ a.reshape(n, 5, 2, 5)[:, :, 1, :])[:, 0]
        elif contact_enabled:
            rho_f = self._foot_coeff @ u
            j_f = (self._foot_coeff @ g).reshape(n, 2, 2, 5)
            s = (self._mass_frac[:, None, :] @ (self._coeff @ u))[:, 0]
            j_s = (self._mass_frac[:, None, :] @ (self._coeff @ g)).reshape(n, 1, 2, 5)
            j_f = j_f - j_s
            foot_pos = q[:, None, 0:2] + rho_f - s[:, None]
            foot_vel = qd[:, None, 0:2] + (j_f @ v_ang[:, None, :, None])[..., 0]
            mu = self.contact_cfg.friction if friction is None else friction
            forces, active = penalty_contact(foot_pos, foot_vel, self.contact_cfg, mu)
            rhs += (j_f * forces[:, :, :, None]).sum(axis=(1, 2))
            base_force = forces.sum(axis=1)

        acc_ang = np.linalg.solve(m_ang, rhs[..., None])[..., 0]

        qd_new = qd.copy()
        qd_new[:, _ANG] += dt * acc_ang
        if not self.pinned:
            qd_new[:, 1] -= dt * self.gravity
            if base_force is not None:
                qd_new[:, 0:2] += dt * base_force / self.total_mass[:, None]
        q_new = q + dt * qd_new
        if self.pinned:
            q_new[:, 0:2] = q[:, 0:2]
            qd_new[:, 0:2] = 0.0

        # hard position limits: clamp and kill outward velocity
        joints = q_new[:, 3:7]
        lo, hi = self.joint_limits[:, 0], self.joint_limits[:, 1]
        below, above = joints < lo, joints > hi
        if below.any() or above.any():
            q_new[:, 3:7] = np.clip(joints, lo, hi)
            jv = qd_new[:, 3:7]
            jv[below & (jv < 0)] = 0.0
            jv[above & (jv > 0)] = 0.0

        # freeze diverged rows so callers can reset them
        if bad.any():
            q_new[bad] = state.q[bad]
            qd_new[bad] = state.qd[bad]

        return SimState(q=q_new, qd=qd_new, time=state.time + dt,
                        contact_forces=forces, contact_active=active), bad

    def pd_step(self, state: SimState, q_des, dt, contact_enabled=True, friction=None):
        """PD torque from the current state, then one physics step."""
        tau = pd_torque(self.gains, q_des, state.q[:, 3:7], state.qd[:, 3:7],
                        self.torque_limits)
        new_state, bad = self.step_masked(state, tau, dt, contact_enabled, friction)
        return new_state, tau, bad

    # -- diagnostics --------------------------------------------------------

    def mechanical_energy(self, state: SimState):
        """Kinetic plus gravitational potential energy per env."""
        q, qd = state.q, state.qd
        m_ang = self.angular_mass_matrix(q)
        v_ang = qd[:, _ANG]
        ke = 0.5 * np.einsum("nd,nde,ne->n", v_ang, m_ang, v_ang)
        if self.pinned:
            u, _ = self._trig(q[:, _ANG])
            rho = self._coeff @ u
            pe = self.gravity * ((self._masses[:, None, :]
                                  @ (q[:, None, 1:2] + rho[:, :, 1:2]))[:, 0, 0])
            return ke + pe
        ke += 0.5 * self.total_mass * (qd[:, 0] ** 2 + qd[:, 1] ** 2)
        return ke + self.total_mass * self.gravity * q[:, 1]

    def horizontal_momentum(self, state: SimState):
        """Total linear momentum along x, summed over bodies."""
        if self.pinned:
            raise ValueError("momentum is not defined for the pinned configuration")
        q, qd = state.q, state.qd
        n = self.num_envs
        _, up = self._trig(q[:, _ANG])
        j_rho, _ = self._jac(up)
        j_rho = j_rho - self._mass_frac[:, None, :] @ j_rho
        v_rel = (j_rho.reshape(n, 5, 2, 5) @ qd[:, None, _ANG, None])[..., 0]
        v_b = qd[:, None, 0:2] + v_rel
        return (self._masses * v_b[:, :, 0]).sum(axis=1)


def apply_push(dynamics: WalkerDynamics, state: SimState, impulse) -> SimState:
    """Horizontal impulse on the base: dv = impulse / total mass."""
    if not np.all(np.isfinite(impulse)):
        raise ValueError("push impulse must be finite")
    out = state.copy()
    out.qd[:, 0] += np.asarray(impulse) / dynamics.total_mass
    return out


def step(model: WalkerModel, state: SimState, torques, dt: float,
         contact: ContactCfg | None = None, contact_enabled: bool = True) -> SimState:
    """Single-model convenience wrapper around WalkerDynamics.step."""
    if not (0.0 < dt <= 0.01):
        raise ValueError(f"dt={dt} outside (0, 0.01]")
    dyn = WalkerDynamics(model, num_envs=state.q.shape[0], contact=contact)
    return dyn.step(state, torques, dt, contact_enabled=contact_enabled)
