"""Leg-length evolution for a planar biped: GA outer loop, RL inner loop,
and distillation of the winning controller into a recurrent student."""

import os as _os

# The numeric kernels here are small; threaded BLAS only adds nondeterministic
# scheduling overhead and oversubscribes the worker pool. Respect explicit
# user settings.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")

__version__ = "0.1.0"
