"""Episodic MDP around the walker simulation: vectorized, ledger-seeded."""

from __future__ import annotations

import numpy as np

from ..config import RunConfig
from ..sim.dynamics import WalkerDynamics
from ..sim.model import WalkerModel
from .ledger import SeedLedger, draw_commands, draw_push_schedule
from .observation import (PHASE_STUDENT, PHASE_TEACHER, Observation,
                          assemble_proprio, proprio_dim)
from .rewards import TASK_COMPREHENSIVE, TASK_MAX_VELOCITY, RewardBreakdown, compute_reward


class CommandError(ValueError):
    """Command sampling requested for a task that has no commands."""


def sample_command(task: str, ledger: SeedLedger, time_s: float, cfg=None,
                   env_index: int = 0) -> float:
    """Piecewise-constant command at `time_s` for one episode of env `env_index`."""
    if task != TASK_COMPREHENSIVE:
        raise CommandError(f"task {task!r} does not use velocity commands")
    cfg = cfg or RunConfig().env
    n_segments = int(np.ceil(cfg.episode_s / cfg.command_resample_s - 1e-9))
    values = draw_commands(ledger.env_rng("command", env_index), n_segments,
                           cfg.command_range)
    seg = min(int(time_s / cfg.command_resample_s), n_segments - 1)
    return float(values[seg])


class WalkerEnv:
    """Batch of independent walker episodes driven by one policy.

    All stochastic events (commands, pushes, friction, mass offsets, start
    jitter) come from per-env streams derived from the bound SeedLedger, so
    two instances with equal ledgers and equal action sequences produce
    bit-identical observation and reward streams.

    Actions are desired joint positions expressed as offsets from the resting
    split stance; targets are clipped to the joint position limits before the
    PD controller runs.
    """

    def __init__(self, models, cfg: RunConfig, num_envs: int | None = None,
                 morphology_sampler=None):
        if isinstance(models, WalkerModel):
            models = [models]
        if num_envs is None:
            num_envs = len(models)
        if len(models) not in (1, num_envs):
            raise ValueError("models must have length 1 or num_envs")
        self.cfg = cfg
        self.task = cfg.task
        self.num_envs = num_envs
        self.base_models = list(models) * (num_envs if len(models) == 1 else 1)
        self.morphology_sampler = morphology_sampler
        self.dyn = WalkerDynamics(self.base_models[0], num_envs, contact=cfg.sim.contact)
        self.control_dt = cfg.control_dt
        self.substeps = cfg.sim.control_substeps
        self.episode_steps = cfg.episode_steps
        self.n_segments = int(np.ceil(cfg.env.episode_s / cfg.env.command_resample_s - 1e-9))
        self.n_pushes = int(np.floor(cfg.env.episode_s / cfg.env.push_interval_s + 1e-9))
        e = cfg.env
        self.stance_pose = np.array([e.stance_hip_split, 0.0, -e.stance_hip_split, 0.0])
        self.ledger: SeedLedger | None = None

        n = num_envs
        self.state = None
        self.step_count = np.zeros(n, dtype=np.int64)
        self.prev_action = np.zeros((n, 4))
        self.friction = np.full(n, cfg.sim.contact.friction)
        self.mass_offset = np.zeros(n)
        self.nominal_height = np.zeros(n)
        self.lengths = np.zeros((n, 2))
        self.commands = np.zeros((n, max(self.n_segments, 1)))
        self.push_times = np.full((n, max(self.n_pushes, 1)), np.inf)
        self.push_impulses = np.zeros((n, max(self.n_pushes, 1)))
        self.next_push = np.zeros(n, dtype=np.int64)
        self.last_push = np.zeros(n)
        self.episode_return = np.zeros(n)

    # -- lifecycle ----------------------------------------------------------

    def reset(self, ledger: SeedLedger) -> Observation:
        """Bind the ledger, rebuild all per-env streams, reset every episode."""
        self.ledger = ledger
        n = self.num_envs
        self._rng = {p: [ledger.env_rng(p, i) for i in range(n)]
                     for p in ("command", "push", "friction", "mass", "init")}
        self._morph_rng = [
            np.random.default_rng(np.random.SeedSequence(entropy=[ledger.init_seed, i, 104729]))
            for i in range(n)]
        self.state = self.dyn.state_from_hip_pose(
            np.zeros((n, 2)), np.zeros(n), np.tile(self.stance_pose, (n, 1)))
        self._reset_rows(np.ones(n, dtype=bool))
        return self.observe(PHASE_TEACHER)

    def _reset_rows(self, mask: np.ndarray):
        cfg = self.cfg
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            return
        n_j = 4
        joints = np.tile(self.stance_pose, (idx.size, 1))
        pitch = np.zeros(idx.size)
        joint_vel = np.zeros((idx.size, n_j))
        pitch_rate = np.zeros(idx.size)
        for row, i in enumerate(idx):
            if self.morphology_sampler is not None:
                self.base_models[i] = self.morphology_sampler(self._morph_rng[i])
            self.friction[i] = self._rng["friction"][i].uniform(*cfg.env.friction_range)
            self.mass_offset[i] = self._rng["mass"][i].uniform(*cfg.env.mass_offset_range)
            self.dyn.set_model(i, self.base_models[i], self.mass_offset[i])
            init = self._rng["init"][i]
            joints[row] += init.uniform(-cfg.env.init_angle_jitter,
                                        cfg.env.init_angle_jitter, n_j)
            pitch[row] = init.uniform(-cfg.env.init_angle_jitter, cfg.env.init_angle_jitter)
            joint_vel[row] = init.uniform(-cfg.env.init_velocity_jitter,
                                          cfg.env.init_velocity_jitter, n_j)
            pitch_rate[row] = init.uniform(-cfg.env.init_velocity_jitter,
                                           cfg.env.init_velocity_jitter)
            times, imps = draw_push_schedule(
                self._rng["push"][i], cfg.env.episode_s, cfg.env.push_interval_s,
                cfg.env.push_jitter_s, cfg.env.push_magnitude)
            self.push_times[i, :len(times)] = times
            self.push_times[i, len(times):] = np.inf
            self.push_impulses[i, :len(imps)] = imps
            if self.task == TASK_COMPREHENSIVE:
                self.commands[i] = draw_commands(self._rng["command"][i],
                                                 self.n_segments, cfg.env.command_range)
            model = self.base_models[i]
            self.nominal_height[i] = model.nominal_standing_height
            self.lengths[i] = model.lengths.as_tuple()

        pitch_full = self.state.q[:, 2].copy()
        joints_full = self.state.q[:, 3:7].copy()
        vel_full = self.state.qd[:, 3:7].copy()
        rate_full = self.state.qd[:, 2].copy()
        pitch_full[idx] = pitch
        joints_full[idx] = joints
        vel_full[idx] = joint_vel
        rate_full[idx] = pitch_rate

        # place the lowest foot at the static penetration depth
        pose = self.dyn.state_from_hip_pose(np.zeros((self.num_envs, 2)),
                                            pitch_full, joints_full)
        foot_rel = self.dyn.foot_positions(pose.q) - self.dyn.hip_position(pose.q)[:, None, :]
        weight = self.dyn.total_mass * self.dyn.gravity
        depth = weight / (2.0 * cfg.sim.contact.stiffness)
        hip_z = -foot_rel[:, :, 1].min(axis=1) - depth

        sub = self.dyn.state_from_hip_pose(
            np.stack([np.zeros(self.num_envs), hip_z], axis=1),
            pitch_full, joints_full, joint_vel=vel_full, pitch_rate=rate_full)
        self.state.q[mask] = sub.q[mask]
        self.state.qd[mask] = sub.qd[mask]
        self.step_count[mask] = 0
        self.prev_action[mask] = 0.0
        self.next_push[mask] = 0
        self.last_push[mask] = 0.0
        self.episode_return[mask] = 0.0

    # -- stepping -----------------------------------------------------------

    def step(self, actions):
        """Advance one control period; auto-resets finished episodes.

        Returns (observation, reward, done, info); the observation already
        reflects the fresh episode for any env that finished this step.
        """
        if self.ledger is None:
            raise RuntimeError("reset(ledger) must be called before step")
        actions = np.asarray(actions, dtype=np.float64)
        if not np.all(np.isfinite(actions)):
            raise ValueError("actions must be finite")
        cfg = self.cfg
        n = self.num_envs
        lo, hi = self.dyn.joint_limits[:, 0], self.dyn.joint_limits[:, 1]
        q_des = np.clip(self.stance_pose + actions, lo, hi)

        # scheduled pushes due at this control step
        t_now = self.step_count * self.control_dt
        cur = np.minimum(self.next_push, self.push_times.shape[1] - 1)
        due_time = self.push_times[np.arange(n), cur]
        due = (self.next_push < self.n_pushes) & (t_now >= due_time)
        if due.any():
            imp = self.push_impulses[np.arange(n), cur]
            self.state.qd[due, 0] += imp[due] / self.dyn.total_mass[due]
            self.last_push[due] = imp[due]
            self.next_push[due] += 1

        torque_sq = np.zeros(n)
        power = np.zeros(n)
        diverged = np.zeros(n, dtype=bool)
        st = self.state
        for _ in range(self.substeps):
            st, tau, bad = self.dyn.pd_step(st, q_des, cfg.sim.physics_dt,
                                            friction=self.friction)
            torque_sq += (tau ** 2).sum(axis=1)
            power += np.abs(tau * st.qd[:, 3:7]).sum(axis=1)
            diverged |= bad
        torque_sq /= self.substeps
        power /= self.substeps
        self.state = st
        self.step_count += 1

        hip_z = self.dyn.hip_position(st.q)[:, 1]
        pitch = st.q[:, 2]
        vel = self.dyn.torso_velocity(st.q, st.qd)
        fell = (hip_z < cfg.env.termination_height_frac * self.nominal_height) | \
               (np.abs(pitch) > cfg.env.termination_pitch)
        truncated = self.step_count >= self.episode_steps
        done = fell | diverged | truncated
        failed = fell | diverged

        breakdown = compute_reward(
            self.task, cfg.env, vx=vel[:, 0], command=self.command_now(),
            torque_sq_sum=torque_sq, action=actions, prev_action=self.prev_action,
            pitch=pitch, hip_height=hip_z, nominal_height=self.nominal_height,
            joints=st.q[:, 3:7], joint_limits=self.dyn.joint_limits, failed=failed)
        if diverged.any():
            breakdown.terms["failure"] = np.where(diverged, cfg.env.failure_penalty, 0.0)
            breakdown.weights["failure"] = 1.0
            breakdown = RewardBreakdown.weighted(breakdown.terms, breakdown.weights)
        reward = breakdown.total

        self.prev_action = actions.copy()
        self.episode_return += reward
        info = {
            "breakdown": breakdown,
            "diverged": diverged,
            "time_outs": truncated & ~failed,
            "vx": vel[:, 0],
            "power": power,
            "hip_height": hip_z,
            "completed_returns": self.episode_return[done].tolist(),
            "completed_lengths": self.step_count[done].tolist(),
        }
        if done.any():
            self._reset_rows(done)
        return self.observe(PHASE_TEACHER), reward, done, info

    # -- observation --------------------------------------------------------

    def command_now(self):
        if self.task != TASK_COMPREHENSIVE:
            return np.zeros(self.num_envs)
        t = self.step_count * self.control_dt
        seg = np.minimum((t / self.cfg.env.command_resample_s).astype(np.int64),
                         self.n_segments - 1)
        return self.commands[np.arange(self.num_envs), seg]

    def observe(self, phase: int = PHASE_TEACHER) -> Observation:
        st = self.state
        t = self.step_count * self.control_dt
        clock = 2.0 * np.pi * t / self.cfg.env.gait_period_s
        proprio = assemble_proprio(
            self.task, st.q[:, 3:7], st.qd[:, 3:7], st.q[:, 2], st.qd[:, 2],
            self.prev_action, clock,
            self.command_now() if self.task == TASK_COMPREHENSIVE else None)
        if phase == PHASE_STUDENT:
            return Observation(proprio=proprio)
        cur = np.minimum(self.next_push, self.push_times.shape[1] - 1)
        next_time = self.push_times[np.arange(self.num_envs), cur]
        to_push = np.where(self.next_push < self.n_pushes, next_time - t,
                           self.cfg.env.push_interval_s)
        privileged = np.stack([self.friction, self.mass_offset, to_push,
                               self.last_push], axis=1)
        return Observation(
            proprio=proprio,
            velocity=self.dyn.torso_velocity(st.q, st.qd),
            privileged=privileged,
            structure=self.lengths.copy(),
        )

    @property
    def proprio_dim(self):
        return proprio_dim(self.task)


def env_step(env: WalkerEnv, actions):
    """Single control step; alias kept for the operation-level API."""
    return env.step(actions)
