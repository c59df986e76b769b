import numpy as np
import pytest

from evowalker.config import RunConfig
from evowalker.env import make_fair_ledger
from evowalker.sweep import grid_sweep, surface_rows, surface_to_json


def _synthetic_cfg(thigh_vals, shin_vals):
    cfg = RunConfig()
    cfg.evo.fitness_mode = "synthetic"
    cfg.sweep.thigh_values = tuple(thigh_vals)
    cfg.sweep.shin_values = tuple(shin_vals)
    cfg.workers = 1
    return cfg.validate()


def test_synthetic_5x5_argmax_lands_nearest_optimum():
    vals = (0.25, 0.29, 0.32, 0.36, 0.40)
    cfg = _synthetic_cfg(vals, vals)
    surface = grid_sweep(cfg, make_fair_ledger(1, 0))
    # closed-form argmax on this lattice: closest cell to (0.31, 0.36)
    assert surface.argmax_cell == (0.32, 0.36)


def test_2x2_bookkeeping_and_tie_rule():
    cfg = _synthetic_cfg((0.30, 0.32), (0.35, 0.37))
    surface = grid_sweep(cfg, make_fair_ledger(1, 0))
    rows = surface_rows(surface)
    assert len(rows) == 4
    assert not any(r["failed"] for r in rows)

    # force an exact tie: optimum equidistant between cells
    cfg2 = _synthetic_cfg((0.30, 0.32), (0.36,))
    cfg2.evo.synthetic_optimum = (0.31, 0.36)
    s2 = grid_sweep(cfg2, make_fair_ledger(1, 0))
    assert s2.argmax_cell == (0.30, 0.36)  # smaller thigh wins ties


def test_cells_invariant_to_evaluation_order():
    vals = (0.25, 0.30, 0.35, 0.40)
    cfg = _synthetic_cfg(vals, vals)
    a = grid_sweep(cfg, make_fair_ledger(1, 0))
    b = grid_sweep(cfg, make_fair_ledger(1, 0), workers=2)
    assert np.array_equal(a.rewards, b.rewards)


def test_surface_json_structure():
    cfg = _synthetic_cfg((0.30,), (0.36,))
    surface = grid_sweep(cfg, make_fair_ledger(3, 17))
    import json
    doc = json.loads(surface_to_json(surface))
    assert doc["argmax"] == {"thigh_m": 0.30, "shin_m": 0.36}
    assert doc["generation"] == 3
    assert len(doc["cells"]) == 1


def test_off_grid_sweep_values_rejected():
    cfg = RunConfig()
    cfg.sweep.thigh_values = (0.305,)
    with pytest.raises(Exception):
        cfg.validate()
