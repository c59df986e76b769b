"""Exhaustive design-space evaluation: the brute-force oracle for the search."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .env.ledger import SeedLedger
from .evo.genome import encode_lengths, genome_key
from .evo.loop import synthetic_reward
from .rl.policy import PolicyParams
from .rl.trainer import TrainingFailure, train_policy
from .sim.model import LegLengths, build_walker
from .workers import parallel_map


@dataclass
class RewardSurface:
    """Reward over a lattice of (thigh, shin) cells, one shared ledger."""

    thigh_values: tuple
    shin_values: tuple
    rewards: np.ndarray          # (n_thigh, n_shin)
    failed: np.ndarray           # (n_thigh, n_shin) bool
    generation: int
    master_seed: int
    policy_iters: int

    @property
    def argmax_cell(self) -> tuple:
        """Best (thigh_m, shin_m); ties go to the smaller thigh, then shin."""
        best = None
        for i, t in enumerate(self.thigh_values):
            for j, s in enumerate(self.shin_values):
                key = (-self.rewards[i, j], t, s)
                if best is None or key < best[0]:
                    best = (key, (t, s))
        return best[1]

    def cells(self):
        for i, t in enumerate(self.thigh_values):
            for j, s in enumerate(self.shin_values):
                yield {"thigh_m": t, "shin_m": s,
                       "reward": float(self.rewards[i, j]),
                       "failed": bool(self.failed[i, j])}


_SWEEP_CTX: dict = {}


def _cell_task(cell):
    thigh, shin = cell
    cfg: RunConfig = _SWEEP_CTX["cfg"]
    lengths = LegLengths(thigh, shin)
    if cfg.evo.fitness_mode == "synthetic":
        return synthetic_reward(lengths, cfg.evo.synthetic_optimum)
    ledger: SeedLedger = _SWEEP_CTX["ledger"]
    warm: PolicyParams = _SWEEP_CTX["warm"]
    model = build_walker(lengths, cfg.sim, cfg.design.thigh_range)
    genome = encode_lengths(lengths, cfg.design)
    try:
        _, stats = train_policy(model, warm, cfg.evo.policy_iters_per_gen, ledger, cfg,
                                stream_key=(genome_key(genome),))
    except TrainingFailure:
        return np.nan
    return float(sum(stats.reward_trace))


def grid_sweep(cfg: RunConfig, ledger: SeedLedger,
               warm_start: PolicyParams | None = None,
               workers: int | None = None) -> RewardSurface:
    """Evaluate every grid cell under one ledger and one training budget.

    Cells use exactly the evaluation applied to search individuals (same
    warm start, same per-individual iteration budget, genome-keyed streams),
    so cell rewards and search rewards are directly comparable. Failed cells
    take the minimum finite reward and carry a failed flag.
    """
    workers = cfg.effective_workers() if workers is None else workers
    t_vals = tuple(cfg.sweep.thigh_values)
    s_vals = tuple(cfg.sweep.shin_values)
    cells = [(t, s) for t in t_vals for s in s_vals]
    _SWEEP_CTX.update(cfg=cfg, ledger=ledger, warm=warm_start)
    flat = np.array(parallel_map(_cell_task, cells, workers), dtype=np.float64)
    rewards = flat.reshape(len(t_vals), len(s_vals))
    failed = ~np.isfinite(rewards)
    if failed.any():
        floor = rewards[~failed].min() if (~failed).any() else 0.0
        rewards = np.where(failed, floor, rewards)
    return RewardSurface(thigh_values=t_vals, shin_values=s_vals, rewards=rewards,
                         failed=failed, generation=ledger.generation,
                         master_seed=ledger.master_seed,
                         policy_iters=cfg.evo.policy_iters_per_gen)


def surface_rows(surface: RewardSurface) -> list:
    return list(surface.cells())


def surface_to_json(surface: RewardSurface) -> str:
    best_t, best_s = surface.argmax_cell
    doc = {
        "grid": {"thigh_values": list(surface.thigh_values),
                 "shin_values": list(surface.shin_values)},
        "generation": surface.generation,
        "master_seed": surface.master_seed,
        "policy_iters_per_cell": surface.policy_iters,
        "argmax": {"thigh_m": best_t, "shin_m": best_s},
        "cells": surface_rows(surface),
    }
    return json.dumps(doc, indent=2, sort_keys=True)
