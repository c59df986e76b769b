import os

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import numpy as np
import pytest

from evowalker.config import RunConfig
from evowalker.sim import LegLengths, build_walker


@pytest.fixture
def cfg():
    return RunConfig().validate()


@pytest.fixture
def model30(cfg):
    return build_walker(LegLengths(0.3, 0.3), cfg.sim)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture(scope="session")
def shared_pretrain():
    """One shared warm-start pretrain for every test that needs it.

    Trains at the default configuration (master_seed 0), which is exactly the
    warm start a default search run would compute. Expensive: several
    minutes; session scoped so it runs at most once.
    """
    from evowalker.rl import pretrain_shared
    cfg = RunConfig().validate()
    warm, stats = pretrain_shared(cfg)
    return cfg, warm, stats
