"""Layered observation record: proprioception, velocity, privileged, structure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rewards import TASK_COMPREHENSIVE

PHASE_TEACHER = 1   # exact velocity plus privileged and structural inputs
PHASE_STUDENT = 2   # proprioception only; the student estimates the rest

PRIVILEGED_DIM = 4  # friction, torso mass offset, time to next push, last push impulse
VELOCITY_DIM = 2
STRUCTURE_DIM = 2


def proprio_dim(task: str) -> int:
    """Joint pos/vel, pitch and rate, previous action, gait clock, plus the
    command slot for the tracking task."""
    base = 4 + 4 + 1 + 1 + 4 + 2
    return base + 1 if task == TASK_COMPREHENSIVE else base


@dataclass
class Observation:
    """One batched observation; privileged and structural parts exist only in
    phase-1 (teacher) observations."""

    proprio: np.ndarray                 # (n, proprio_dim)
    velocity: np.ndarray | None = None  # (n, 2) exact torso velocity
    privileged: np.ndarray | None = None  # (n, 4)
    structure: np.ndarray | None = None   # (n, 2) thigh_m, shin_m

    @property
    def num_envs(self) -> int:
        return self.proprio.shape[0]

    def copy(self) -> "Observation":
        return Observation(
            self.proprio.copy(),
            None if self.velocity is None else self.velocity.copy(),
            None if self.privileged is None else self.privileged.copy(),
            None if self.structure is None else self.structure.copy(),
        )


def assemble_proprio(task, joints, joint_vel, pitch, pitch_rate, prev_action,
                     clock_phase, command=None):
    cols = [joints, joint_vel, pitch[:, None], pitch_rate[:, None], prev_action,
            np.sin(clock_phase)[:, None], np.cos(clock_phase)[:, None]]
    if task == TASK_COMPREHENSIVE:
        cols.append(np.asarray(command)[:, None])
    return np.concatenate(cols, axis=1)


def build_observation(env, phase: int = PHASE_TEACHER) -> Observation:
    """Observation for the env's current state at the requested phase."""
    return env.observe(phase)
