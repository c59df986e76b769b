"""Genetic operators: fitness shift, roulette selection, crossover, mutation."""

from __future__ import annotations

import numpy as np


def shifted_fitness(total_rewards, epsilon: float) -> np.ndarray:
    """reward - min(reward) + epsilon: strictly positive, shift invariant."""
    r = np.asarray(total_rewards, dtype=np.float64)
    if r.size == 0:
        raise ValueError("population is empty")
    if not np.isfinite(r).all():
        raise ValueError("rewards must be finite (apply the failure floor first)")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return r - r.min() + epsilon


def roulette_select(fitness, count: int, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. parent indices with probability proportional to fitness."""
    f = np.asarray(fitness, dtype=np.float64)
    if (f <= 0).any():
        raise ValueError("roulette selection needs strictly positive fitness")
    return rng.choice(f.size, size=count, p=f / f.sum())


def crossover(parent_a, parent_b, p_c: float, rng: np.random.Generator):
    """Single-point crossover with probability p_c, else copies of the parents."""
    a = np.asarray(parent_a, dtype=np.int8)
    b = np.asarray(parent_b, dtype=np.int8)
    if a.shape != b.shape:
        raise ValueError("parents must have equal genome length")
    if rng.random() >= p_c or a.size < 2:
        return a.copy(), b.copy()
    cut = int(rng.integers(1, a.size))
    child_a = np.concatenate([a[:cut], b[cut:]])
    child_b = np.concatenate([b[:cut], a[cut:]])
    return child_a, child_b


def mutate(genome, p_m: float, rng: np.random.Generator) -> np.ndarray:
    """Independent per-bit flips with probability p_m."""
    g = np.asarray(genome, dtype=np.int8)
    flips = rng.random(g.size) < p_m
    out = g.copy()
    out[flips] = 1 - out[flips]
    return out
