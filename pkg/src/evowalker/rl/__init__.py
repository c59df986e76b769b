from .distill import (StudentParams, distill_loss_and_grads, distill_student,
                      evaluate_student, gru_encode_history, init_student,
                      student_vs_teacher)
from .gae import compute_gae
from .nets import GRU, MLP, Adam
from .policy import (PolicyConfigError, PolicyParams, encode_privileged, gaussian_logp,
                     init_policy, policy_forward, value_forward)
from .ppo import (RolloutBatch, UpdateStats, normalize_advantages, ppo_loss_and_grads,
                  ppo_update)
from .trainer import (TrainingFailure, TrainStats, evaluate_policy, pretrain_shared,
                      train_policy)

__all__ = [
    "StudentParams", "distill_loss_and_grads", "distill_student", "evaluate_student",
    "gru_encode_history", "init_student", "student_vs_teacher", "compute_gae", "GRU",
    "MLP", "Adam", "PolicyConfigError", "PolicyParams", "encode_privileged",
    "gaussian_logp", "init_policy", "policy_forward", "value_forward", "RolloutBatch",
    "UpdateStats", "normalize_advantages", "ppo_loss_and_grads", "ppo_update",
    "TrainingFailure", "TrainStats", "evaluate_policy", "pretrain_shared",
    "train_policy",
]
