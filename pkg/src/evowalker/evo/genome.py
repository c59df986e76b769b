"""Bitstring genome for the two leg lengths."""

from __future__ import annotations

import numpy as np

from ..config import DesignSpaceCfg
from ..sim.model import LegLengths


class CodecError(ValueError):
    """Genome has the wrong length or lengths are off the design grid."""


def genome_length(design: DesignSpaceCfg) -> int:
    return 2 * design.bits_per_gene


def _gene_to_int(bits: np.ndarray) -> int:
    """Unsigned integer from MSB-first bits."""
    value = 0
    for b in bits:
        value = (value << 1) | int(b)
    return value


def _int_to_gene(value: int, n_bits: int) -> np.ndarray:
    return np.array([(value >> (n_bits - 1 - i)) & 1 for i in range(n_bits)],
                    dtype=np.int8)


def decode_gene(value: int, low: float, high: float, resolution: float,
                n_bits: int) -> float:
    """Linear map of an n-bit integer onto [low, high], snapped to the grid."""
    levels = (1 << n_bits) - 1
    raw = low + (value / levels) * (high - low)
    snapped = round(raw / resolution) * resolution
    return float(np.clip(round(snapped, 10), low, high))


def decode_genome(genome, design: DesignSpaceCfg | None = None) -> LegLengths:
    """Genome bits -> leg lengths on the design grid."""
    design = design or DesignSpaceCfg()
    bits = np.asarray(genome, dtype=np.int8)
    expect = genome_length(design)
    if bits.shape != (expect,):
        raise CodecError(f"genome must hold {expect} bits, got shape {bits.shape}")
    if not np.isin(bits, (0, 1)).all():
        raise CodecError("genome bits must be 0 or 1")
    nb = design.bits_per_gene
    thigh = decode_gene(_gene_to_int(bits[:nb]), *design.thigh_range,
                        design.resolution, nb)
    shin = decode_gene(_gene_to_int(bits[nb:]), *design.shin_range,
                       design.resolution, nb)
    return LegLengths(thigh, shin)


def encode_gene(value: float, low: float, high: float, resolution: float,
                n_bits: int) -> np.ndarray:
    steps = (value - low) / resolution
    if abs(steps - round(steps)) > 1e-6 or not (low - 1e-9 <= value <= high + 1e-9):
        raise CodecError(f"{value} is not on the {resolution} m grid in [{low}, {high}]")
    levels = (1 << n_bits) - 1
    n = int(round((value - low) / (high - low) * levels))
    return _int_to_gene(n, n_bits)


def encode_lengths(lengths: LegLengths, design: DesignSpaceCfg | None = None) -> np.ndarray:
    """Leg lengths -> genome whose decode reproduces them (round-trip law)."""
    design = design or DesignSpaceCfg()
    nb = design.bits_per_gene
    genome = np.concatenate([
        encode_gene(lengths.thigh_m, *design.thigh_range, design.resolution, nb),
        encode_gene(lengths.shin_m, *design.shin_range, design.resolution, nb),
    ])
    check = decode_genome(genome, design)
    if check.as_tuple() != (round(lengths.thigh_m, 10), round(lengths.shin_m, 10)):
        raise CodecError(f"round-trip failed for {lengths}: decoded {check}")
    return genome


def genome_key(genome) -> int:
    """Genome bits as one integer, usable as an RNG stream key."""
    return _gene_to_int(np.asarray(genome, dtype=np.int8))


def random_genome(rng: np.random.Generator, design: DesignSpaceCfg | None = None):
    design = design or DesignSpaceCfg()
    return rng.integers(0, 2, size=genome_length(design)).astype(np.int8)
