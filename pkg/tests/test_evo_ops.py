import numpy as np
import pytest

from evowalker.evo import crossover, mutate, roulette_select, shifted_fitness


def test_shifted_fitness_example():
    assert np.allclose(shifted_fitness([5.0, 3.0, 9.0], 0.01), [2.01, 0.01, 6.01])


def test_shifted_fitness_degenerate_all_equal():
    assert np.allclose(shifted_fitness([4.0, 4.0, 4.0], 0.01), 0.01)


def test_shifted_fitness_shift_invariance(rng):
    r = rng.normal(0, 10, 32)
    assert np.allclose(shifted_fitness(r, 0.01), shifted_fitness(r + 123.456, 0.01))


def test_shifted_fitness_positivity(rng):
    f = shifted_fitness(rng.normal(-50, 30, 100), 0.01)
    assert f.min() == pytest.approx(0.01)
    assert (f >= 0.01 - 1e-15).all()


def test_shifted_fitness_rejects_empty_and_nonfinite():
    with pytest.raises(ValueError):
        shifted_fitness([], 0.01)
    with pytest.raises(ValueError):
        shifted_fitness([1.0, np.nan], 0.01)
    with pytest.raises(ValueError):
        shifted_fitness([1.0], 0.0)


def test_roulette_uniform_fitness_uniform_selection():
    rng = np.random.default_rng(3)
    picks = roulette_select(np.ones(4), 40_000, rng)
    freq = np.bincount(picks, minlength=4) / 40_000
    assert np.allclose(freq, 0.25, atol=0.01)


def test_roulette_frequency_matches_probability():
    rng = np.random.default_rng(11)
    picks = roulette_select(np.array([1.0, 0.01, 0.01]), 100_000, rng)
    freq0 = np.mean(picks == 0)
    assert abs(freq0 - 1.0 / 1.02) < 0.005


def test_roulette_scale_invariance():
    picks_a = roulette_select(np.array([1.0, 2.0, 3.0]), 50_000,
                              np.random.default_rng(7))
    picks_b = roulette_select(np.array([10.0, 20.0, 30.0]), 50_000,
                              np.random.default_rng(7))
    assert np.array_equal(picks_a, picks_b)


def test_roulette_rejects_nonpositive():
    with pytest.raises(ValueError):
        roulette_select(np.array([1.0, 0.0]), 5, np.random.default_rng(0))


def test_crossover_prob_zero_copies_parents(rng):
    a = rng.integers(0, 2, 18).astype(np.int8)
    b = rng.integers(0, 2, 18).astype(np.int8)
    ca, cb = crossover(a, b, 0.0, rng)
    assert np.array_equal(ca, a) and np.array_equal(cb, b)
    ca[0] ^= 1
    assert not np.array_equal(ca, a)  # children are copies, not views


def test_crossover_cut_at_nine_swaps_genes():
    a = np.concatenate([np.ones(9), np.zeros(9)]).astype(np.int8)
    b = np.concatenate([np.zeros(9), np.ones(9)]).astype(np.int8)
    found = False
    for seed in range(200):
        rng = np.random.default_rng(seed)
        ca, cb = crossover(a, b, 1.0, rng)
        replay = np.random.default_rng(seed)
        replay.random()  # the p_c coin precedes the cut draw
        if int(replay.integers(1, 18)) == 9:
            assert ca.all() and not cb.any()
            found = True
    assert found


def test_crossover_positional_exchange_property(rng):
    for _ in range(10_000):
        a = rng.integers(0, 2, 18).astype(np.int8)
        b = rng.integers(0, 2, 18).astype(np.int8)
        ca, cb = crossover(a, b, 0.8, rng)
        assert ((ca == a) & (cb == b) | (ca == b) & (cb == a)).all()


def test_mutate_identity_and_complement(rng):
    g = rng.integers(0, 2, 18).astype(np.int8)
    assert np.array_equal(mutate(g, 0.0, rng), g)
    assert np.array_equal(mutate(g, 1.0, rng), 1 - g)


def test_mutate_expected_flip_count():
    rng = np.random.default_rng(123)
    g = np.zeros(18, dtype=np.int8)
    flips = sum(int(mutate(g, 0.03, rng).sum()) for _ in range(100_000))
    assert flips / 100_000 == pytest.approx(0.54, abs=0.01)
