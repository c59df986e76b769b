import numpy as np
import pytest

from evowalker.rl import compute_gae


def brute_force_lambda1(rewards, values, bootstrap, gamma):
    """Discounted reward-to-go minus baseline, no dones."""
    t_len = len(rewards)
    adv = np.zeros(t_len)
    for t in range(t_len):
        total = sum(gamma ** (k - t) * rewards[k] for k in range(t, t_len))
        total += gamma ** (t_len - t) * bootstrap
        adv[t] = total - values[t]
    return adv


def brute_force_general(rewards, values, dones, bootstrap, gamma, lam):
    """Explicit exponentially weighted sum of k-step advantages."""
    t_len = len(rewards)
    v_next = np.concatenate([values[1:], [bootstrap]])
    deltas = rewards + gamma * v_next * (1.0 - dones) - values
    adv = np.zeros(t_len)
    for t in range(t_len):
        acc, w = 0.0, 1.0
        for k in range(t, t_len):
            acc += w * deltas[k]
            if dones[k]:
                break
            w *= gamma * lam
        adv[t] = acc
    return adv


def test_lambda_one_matches_discounted_sums(rng):
    for _ in range(100):
        r = rng.normal(0, 1, 10)
        v = rng.normal(0, 1, 10)
        boot = rng.normal()
        adv, ret = compute_gae(r, v, np.zeros(10), boot, 0.99, 1.0)
        assert np.allclose(adv, brute_force_lambda1(r, v, boot, 0.99), atol=1e-10)
        assert np.allclose(ret, adv + v, atol=0)


def test_lambda_095_matches_weighted_k_step_sums(rng):
    for _ in range(100):
        r = rng.normal(0, 1, 10)
        v = rng.normal(0, 1, 10)
        d = (rng.random(10) < 0.2).astype(float)
        boot = rng.normal()
        adv, _ = compute_gae(r, v, d, boot, 0.99, 0.95)
        assert np.allclose(adv, brute_force_general(r, v, d, boot, 0.99, 0.95),
                           atol=1e-10)


def test_all_zero_inputs_give_zero_advantages():
    adv, ret = compute_gae(np.zeros(8), np.zeros(8), np.zeros(8), 0.0, 0.99, 0.95)
    assert np.array_equal(adv, np.zeros(8))
    assert np.array_equal(ret, np.zeros(8))


def test_done_zeroes_bootstrap_across_boundary(rng):
    r = rng.normal(0, 1, 10)
    v = rng.normal(0, 1, 10)
    d = np.zeros(10)
    d[4] = 1.0
    adv, _ = compute_gae(r, v, d, rng.normal(), 0.99, 0.95)
    # the first segment must equal GAE run on the truncated episode alone
    adv_head, _ = compute_gae(r[:5], v[:5], np.array([0, 0, 0, 0, 1.0]), 123.0,
                              0.99, 0.95)
    assert np.allclose(adv[:5], adv_head, atol=1e-12)


def test_batched_matches_per_env(rng):
    r = rng.normal(0, 1, (12, 3))
    v = rng.normal(0, 1, (12, 3))
    d = (rng.random((12, 3)) < 0.15).astype(float)
    boot = rng.normal(0, 1, 3)
    adv, ret = compute_gae(r, v, d, boot, 0.99, 0.95)
    for j in range(3):
        a_j, r_j = compute_gae(r[:, j], v[:, j], d[:, j], boot[j], 0.99, 0.95)
        assert np.allclose(adv[:, j], a_j, atol=0)
        assert np.allclose(ret[:, j], r_j, atol=0)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        compute_gae(np.zeros(5), np.zeros(4), np.zeros(5), 0.0, 0.99, 0.95)
