"""Per-generation shared seeds so every individual faces identical conditions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_PURPOSES = ("command", "push", "friction", "mass", "init")


def derive_seed(*keys: int) -> int:
    """Stable 64-bit seed from a tuple of non-negative integer keys."""
    return int(np.random.SeedSequence(entropy=list(keys)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SeedLedger:
    """Seeds for every stochastic environment event in one generation.

    All individuals evaluated in the same generation share one ledger, so
    command resampling, pushes, friction, mass offsets and start jitter are
    identical across the population.
    """

    generation: int
    master_seed: int
    command_seed: int
    push_seed: int
    friction_seed: int
    mass_seed: int
    init_seed: int

    def env_rng(self, purpose: str, env_index: int) -> np.random.Generator:
        seed = getattr(self, f"{purpose}_seed")
        return np.random.default_rng(np.random.SeedSequence(entropy=[seed, env_index]))


def make_fair_ledger(generation: int, master_seed: int) -> SeedLedger:
    """Deterministic ledger for (generation, master_seed)."""
    if generation < 0:
        raise ValueError("generation must be non-negative")
    seeds = {p: derive_seed(master_seed, generation, i) for i, p in enumerate(_PURPOSES)}
    return SeedLedger(generation=generation, master_seed=master_seed,
                      **{f"{p}_seed": s for p, s in seeds.items()})


def draw_push_schedule(rng: np.random.Generator, episode_s: float, interval_s: float,
                       jitter_s: float, magnitude_range: tuple[float, float]):
    """Scheduled push times and signed impulses for one episode.

    Pushes are spaced by `interval_s` with uniform jitter; one push is
    scheduled per full interval inside the episode. Draw order is fixed so
    stream positions stay aligned across episodes.
    """
    count = int(np.floor(episode_s / interval_s + 1e-9))
    base = interval_s * np.arange(1, count + 1)
    jitter = rng.uniform(-jitter_s, jitter_s, size=count) if jitter_s > 0 else np.zeros(count)
    magnitudes = rng.uniform(magnitude_range[0], magnitude_range[1], size=count)
    signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
    return base + jitter, magnitudes * signs


def draw_commands(rng: np.random.Generator, n_segments: int,
                  command_range: tuple[float, float]) -> np.ndarray:
    """Piecewise-constant command values for one episode."""
    return rng.uniform(command_range[0], command_range[1], size=n_segments)
