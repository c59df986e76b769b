from .ledger import SeedLedger, derive_seed, draw_commands, draw_push_schedule, make_fair_ledger
from .observation import (PHASE_STUDENT, PHASE_TEACHER, Observation, build_observation,
                          proprio_dim)
from .rewards import (TASK_COMPREHENSIVE, TASK_MAX_VELOCITY, TERM_NAMES, RewardBreakdown,
                      compute_reward, tracking_term)
from .walker_env import CommandError, WalkerEnv, env_step, sample_command

__all__ = [
    "SeedLedger", "derive_seed", "draw_commands", "draw_push_schedule", "make_fair_ledger",
    "PHASE_STUDENT", "PHASE_TEACHER", "Observation", "build_observation", "proprio_dim",
    "TASK_COMPREHENSIVE", "TASK_MAX_VELOCITY", "TERM_NAMES", "RewardBreakdown",
    "compute_reward", "tracking_term", "CommandError", "WalkerEnv", "env_step",
    "sample_command",
]
