import itertools

import numpy as np
import pytest

from evowalker.config import DesignSpaceCfg
from evowalker.evo import (CodecError, decode_gene, decode_genome, encode_lengths,
                           genome_key, genome_length, random_genome)
from evowalker.sim import LegLengths

DESIGN = DesignSpaceCfg()


def test_all_zero_bits_decode_to_lower_bound():
    assert decode_genome(np.zeros(18, dtype=np.int8)).as_tuple() == (0.20, 0.20)


def test_all_one_bits_decode_to_upper_bound():
    assert decode_genome(np.ones(18, dtype=np.int8)).as_tuple() == (0.40, 0.40)


def test_gene_256_rounds_to_030():
    # raw = 0.2 + (256 / 511) * 0.2 = 0.300195..., snaps to the 0.01 grid
    raw = 0.2 + (256 / 511) * 0.2
    assert 0.300 < raw < 0.3005
    assert decode_gene(256, 0.2, 0.4, 0.01, 9) == pytest.approx(0.30)


def test_decode_wrong_length_rejected():
    with pytest.raises(CodecError):
        decode_genome(np.zeros(17, dtype=np.int8))


def test_decode_non_binary_rejected():
    g = np.zeros(18, dtype=np.int8)
    g[0] = 2
    with pytest.raises(CodecError):
        decode_genome(g)


def test_encode_reported_optimum_round_trips():
    g = encode_lengths(LegLengths(0.31, 0.36))
    assert decode_genome(g).as_tuple() == (0.31, 0.36)


def test_encode_lower_bound_is_all_zero_genes():
    g = encode_lengths(LegLengths(0.20, 0.20))
    assert not g.any()


def test_encode_off_grid_rejected():
    with pytest.raises(CodecError):
        encode_lengths(LegLengths(0.305, 0.3))


def test_round_trip_all_441_grid_points():
    grid = np.round(np.arange(0.20, 0.401, 0.01), 10)
    for t, s in itertools.product(grid, grid):
        assert decode_genome(encode_lengths(LegLengths(t, s))).as_tuple() == (t, s)


def test_every_gene_value_lands_on_grid_in_range():
    for n in range(512):
        v = decode_gene(n, 0.2, 0.4, 0.01, 9)
        assert 0.20 - 1e-12 <= v <= 0.40 + 1e-12
        steps = v / 0.01
        assert abs(steps - round(steps)) < 1e-9


def test_genome_key_distinct_and_stable(rng):
    a = random_genome(rng)
    b = a.copy()
    b[0] ^= 1
    assert genome_key(a) == genome_key(a.copy())
    assert genome_key(a) != genome_key(b)
    assert genome_length(DESIGN) == 18
