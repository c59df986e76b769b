from .contact import contact_forces, friction_clamp, penalty_contact
from .dynamics import (NUM_JOINTS, NUM_Q, SimState, SimulationDiverged,
                       WalkerDynamics, apply_push, step)
from .model import LegLengths, ModelError, PdGains, WalkerModel, build_walker, pd_torque

__all__ = [
    "NUM_JOINTS", "NUM_Q", "SimState", "SimulationDiverged", "WalkerDynamics",
    "apply_push", "step", "LegLengths", "ModelError", "PdGains", "WalkerModel",
    "build_walker", "pd_torque", "contact_forces", "friction_clamp", "penalty_contact",
]
