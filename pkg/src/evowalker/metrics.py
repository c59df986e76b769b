"""Locomotion metrics and population statistics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MetricUndefined(ValueError):
    """The trajectory does not support the requested metric."""


MIN_MEAN_VELOCITY = 0.05  # m/s; slower trajectories make transport cost meaningless


@dataclass
class MetricsRecord:
    """Per-episode evaluation row."""

    mean_power: float      # W, sum over joints of |torque * joint velocity|
    mass: float            # kg
    mean_velocity: float   # m/s
    max_velocity: float
    cot: float | None      # None when the episode was too slow to define it
    froude: float
    leg_length: float      # m, thigh + shin

    def finite(self) -> bool:
        vals = [self.mean_power, self.mass, self.mean_velocity, self.max_velocity,
                self.froude, self.leg_length]
        if self.cot is not None:
            vals.append(self.cot)
        return bool(np.isfinite(vals).all())


def cost_of_transport(power_trace, mass: float, velocity_trace, g: float = 9.81) -> float:
    """mean(P) / (m * g * mean(v)); rejects near-stationary trajectories."""
    if mass <= 0 or g <= 0:
        raise ValueError("mass and g must be positive")
    p = float(np.mean(power_trace))
    v = float(np.mean(velocity_trace))
    if v <= MIN_MEAN_VELOCITY:
        raise MetricUndefined(
            f"mean velocity {v:.4f} m/s is below {MIN_MEAN_VELOCITY} m/s")
    return p / (mass * g * v)


def froude_number(v: float, leg_length: float, g: float = 9.81) -> float:
    """v^2 / (g * l), the dynamic-similarity number for legged gaits."""
    if leg_length <= 0:
        raise ValueError(f"leg length must be positive, got {leg_length}")
    if g <= 0:
        raise ValueError("g must be positive")
    return v ** 2 / (g * leg_length)


# Published reference robots used as formula cross-checks. The wow_orin row's
# reported Froude number is inconsistent with its listed speed and leg length:
# v^2/(g*l) = 2.1^2 / (9.81 * 0.7) = 0.642, not the reported 0.75 (the report
# would need l close to 0.6 m). The formula is trusted; the row is kept as
# published and flagged.
REFERENCE_GAITS = {
    "wow_orin": {"mass": 10.5, "leg_length": 0.7, "max_velocity": 2.1,
                 "reported_cot": 0.407, "reported_froude": 0.75,
                 "froude_consistent": False},
    "cassie": {"mass": 31.0, "leg_length": 1.0, "max_velocity": 3.2,
               "reported_cot": 0.762, "reported_froude": 1.04,
               "froude_consistent": True},
    "unitree_h1": {"mass": 47.0, "leg_length": 0.8, "max_velocity": 1.9,
                   "reported_cot": 0.718, "reported_froude": 0.46,
                   "froude_consistent": True},
}


def population_stats(history: list) -> list:
    """Per-generation descriptive statistics from evolution history records.

    Returns one dict per generation with the population mean reward, the
    maximum shifted fitness, leg-length means and spreads, and length
    histograms binned on the 0.01 m design grid.
    """
    if not history:
        raise ValueError("history is empty")
    out = []
    for rec in history:
        rows = rec["rows"]
        thigh = np.array([r["thigh_m"] for r in rows])
        shin = np.array([r["shin_m"] for r in rows])
        rewards = np.array([r["total_reward"] for r in rows])
        fitness = np.array([r["shifted_fitness"] for r in rows])
        out.append({
            "generation": rec["generation"],
            "population": len(rows),
            "mean_reward": float(rewards.mean()),
            "reward_variance": float(rewards.var()),
            "max_fitness": float(fitness.max()),
            "thigh_mean": float(thigh.mean()),
            "thigh_spread": float(thigh.max() - thigh.min()),
            "shin_mean": float(shin.mean()),
            "shin_spread": float(shin.max() - shin.min()),
            "thigh_hist": _grid_hist(thigh),
            "shin_hist": _grid_hist(shin),
        })
    return out


def _grid_hist(values, resolution: float = 0.01) -> dict:
    keys = np.round(np.asarray(values) / resolution).astype(int)
    hist = {}
    for k in keys:
        key = round(k * resolution, 10)
        hist[key] = hist.get(key, 0) + 1
    return hist
