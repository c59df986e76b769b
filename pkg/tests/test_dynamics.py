import numpy as np
import pytest

from evowalker.sim import (LegLengths, SimulationDiverged, WalkerDynamics, apply_push,
                           build_walker, step)


def _wide_limits(dyn):
    dyn.joint_limits = np.array([[-10.0, 10.0]] * 4)


def _energy_oracle(dyn, state):
    """Independent KE + PE sum: bodies reconstructed from the kinematics."""
    q, qd = state.q, state.qd
    u, up = dyn._trig(q[:, 2:7])
    rho = dyn._coeff @ u
    j_rho, _ = dyn._jac(up)
    n = q.shape[0]
    if dyn.pinned:
        pos = q[:, None, 0:2] + rho
        vel = (j_rho.reshape(n, 5, 2, 5) @ qd[:, None, 2:7, None])[..., 0]
    else:
        frac = dyn._mass_frac[:, None, :]
        s = (frac @ rho)[:, 0]
        j_r = j_rho - frac @ j_rho
        pos = q[:, None, 0:2] + rho - s[:, None]
        vel = qd[:, None, 0:2] + (j_r.reshape(n, 5, 2, 5) @ qd[:, None, 2:7, None])[..., 0]
    w = np.array([[1, 0, 0, 0, 0], [1, 1, 0, 0, 0], [1, 1, 1, 0, 0],
                  [1, 0, 0, 1, 0], [1, 0, 0, 1, 1]], dtype=float)
    omega = qd[:, 2:7] @ w.T
    ke = 0.5 * (dyn._masses * (vel ** 2).sum(-1)).sum(-1) \
        + 0.5 * (dyn._inertias * omega ** 2).sum(-1)
    pe = dyn.gravity * (dyn._masses * pos[:, :, 1]).sum(-1)
    return ke + pe


def test_passive_pendulum_energy_drift_below_1pct(model30):
    dyn = WalkerDynamics(model30, num_envs=1, pinned=True)
    _wide_limits(dyn)
    st = dyn.state_from_hip_pose(np.array([[0.0, 1.5]]), pitch=0.3,
                                 joints=np.array([[0.5, -0.4, -0.6, 0.3]]))
    e0 = _energy_oracle(dyn, st)[0]
    worst = 0.0
    for _ in range(10_000):
        st, bad = dyn.step_masked(st, np.zeros((1, 4)), 1e-3, contact_enabled=False)
        assert not bad.any()
        worst = max(worst, abs(_energy_oracle(dyn, st)[0] - e0))
    assert worst / abs(e0) < 0.01


def test_energy_oracle_matches_internal_accounting(model30):
    dyn = WalkerDynamics(model30, num_envs=3)
    _wide_limits(dyn)
    rng = np.random.default_rng(5)
    st = dyn.state_from_hip_pose(rng.normal(0, 1, (3, 2)) + [0, 3.0],
                                 rng.normal(0, 0.3, 3), rng.normal(0, 0.5, (3, 4)),
                                 joint_vel=rng.normal(0, 1, (3, 4)),
                                 base_vel=rng.normal(0, 1, (3, 2)),
                                 pitch_rate=rng.normal(0, 1, 3))
    assert np.allclose(dyn.mechanical_energy(st), _energy_oracle(dyn, st), atol=1e-9)


def test_ballistic_horizontal_momentum_conserved(model30):
    dyn = WalkerDynamics(model30, num_envs=1)
    _wide_limits(dyn)
    st = dyn.state_from_hip_pose(np.array([[0.0, 50.0]]), pitch=0.2,
                                 joints=np.array([[0.4, -0.3, -0.5, 0.2]]),
                                 joint_vel=np.array([[1.0, -2.0, 0.5, 1.5]]),
                                 base_vel=np.array([[0.7, 0.2]]), pitch_rate=0.9)
    p_prev = dyn.horizontal_momentum(st)[0]
    for _ in range(3000):
        st, _ = dyn.step_masked(st, np.zeros((1, 4)), 1e-3, contact_enabled=False)
        p = dyn.horizontal_momentum(st)[0]
        assert abs(p - p_prev) < 1e-9
        p_prev = p


def test_free_fall_matches_gravity(model30):
    dyn = WalkerDynamics(model30, num_envs=1)
    st = dyn.state_from_hip_pose(np.array([[0.0, 10.0]]), 0.0,
                                 np.array([[0.1, -0.2, -0.1, 0.2]]))
    v0 = st.qd[0, 1]
    st, _ = dyn.step_masked(st, np.zeros((1, 4)), 1e-3, contact_enabled=False)
    assert st.qd[0, 1] - v0 == pytest.approx(-9.81e-3)


def test_static_stance_supports_weight(model30):
    dyn = WalkerDynamics(model30, num_envs=1)
    split = 0.15
    joints = np.array([[split, 0.0, -split, 0.0]])
    h0 = 0.6 * np.cos(split)
    st = dyn.state_from_hip_pose(np.array([[0.0, h0 - 0.001]]), 0.0, joints)
    forces = []
    for i in range(3000):
        st, tau, bad = dyn.pd_step(st, joints, 1e-3)
        assert not bad.any()
        if i >= 2500:
            forces.append(st.contact_forces[0, :, 1].sum())
    weight = model30.total_mass * model30.gravity
    assert np.mean(forces) == pytest.approx(weight, rel=0.02)


def test_step_determinism_bit_exact(model30):
    def run():
        dyn = WalkerDynamics(model30, num_envs=2)
        st = dyn.state_from_hip_pose(np.array([[0.0, 0.55], [0.0, 0.55]]), 0.05,
                                     np.array([[0.2, -0.1, -0.2, 0.1]] * 2))
        out = []
        for k in range(200):
            tau = 5.0 * np.sin(0.01 * k) * np.ones((2, 4))
            st, _ = dyn.step_masked(st, tau, 1e-3)
            out.append(st.q.copy())
        return np.array(out)

    a, b = run(), run()
    assert np.array_equal(a, b)


def test_apply_push_examples(model30):
    dyn = WalkerDynamics(model30, num_envs=1)
    st = dyn.state_from_hip_pose(np.array([[0.0, 0.6]]), 0.0, np.zeros((1, 4)))
    same = apply_push(dyn, st, 0.0)
    assert np.array_equal(same.q, st.q) and np.array_equal(same.qd, st.qd)

    pushed = apply_push(dyn, st, 5.25)
    assert pushed.qd[0, 0] - st.qd[0, 0] == pytest.approx(5.25 / model30.total_mass)
    assert np.array_equal(pushed.q, st.q)
    assert np.array_equal(pushed.qd[:, 1:], st.qd[:, 1:])

    back = apply_push(dyn, apply_push(dyn, st, 3.0), -3.0)
    assert back.qd[0, 0] == pytest.approx(st.qd[0, 0])


def test_apply_push_rejects_nonfinite(model30):
    dyn = WalkerDynamics(model30, num_envs=1)
    st = dyn.state_from_hip_pose(np.array([[0.0, 0.6]]), 0.0, np.zeros((1, 4)))
    with pytest.raises(ValueError):
        apply_push(dyn, st, np.nan)


def test_divergence_raises_with_quantity(model30):
    dyn = WalkerDynamics(model30, num_envs=1)
    st = dyn.state_from_hip_pose(np.array([[0.0, 0.6]]), 0.0, np.zeros((1, 4)))
    st.q[0, 2] = np.nan
    with pytest.raises(SimulationDiverged) as err:
        dyn.step(st, np.zeros((1, 4)), 1e-3)
    assert "q[env 0]" in str(err.value)


def test_step_wrapper_validates_dt(model30):
    dyn = WalkerDynamics(model30, num_envs=1)
    st = dyn.state_from_hip_pose(np.array([[0.0, 0.6]]), 0.0, np.zeros((1, 4)))
    with pytest.raises(ValueError):
        step(model30, st, np.zeros((1, 4)), 0.02)


def test_joint_limits_clamped_every_step(model30):
    dyn = WalkerDynamics(model30, num_envs=1)
    st = dyn.state_from_hip_pose(np.array([[0.0, 5.0]]), 0.0, np.zeros((1, 4)),
                                 joint_vel=np.full((1, 4), 50.0))
    for _ in range(500):
        st, _ = dyn.step_masked(st, np.zeros((1, 4)), 1e-3, contact_enabled=False)
        q = st.q[0, 3:7]
        assert (q >= dyn.joint_limits[:, 0] - 1e-12).all()
        assert (q <= dyn.joint_limits[:, 1] + 1e-12).all()
