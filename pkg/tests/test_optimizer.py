import numpy as np
import pytest

from fastsgd.codec import SparseGradient
from fastsgd.optimizer import AdamConfig, AdamState, adam_step


def grad(pairs, dim):
    return SparseGradient.from_pairs(pairs, dim)


def test_empty_gradient_changes_nothing():
    theta = np.ones(4)
    state = AdamState.zeros(4)
    adam_step(state, theta, grad([], 4), AdamConfig(lr=0.1))
    assert np.array_equal(theta, np.ones(4))
    assert not state.m.any() and not state.v.any()


def test_single_step_closed_form():
    theta = np.zeros(3)
    state = AdamState.zeros(3)
    adam_step(state, theta, grad([(0, 1.0)], 3), AdamConfig(lr=0.1))
    assert state.m[0] == pytest.approx(0.1)
    assert state.v[0] == pytest.approx(0.001)
    expected = 0.1 * 0.1 / np.sqrt(0.001 + 1e-8)
    assert -theta[0] == pytest.approx(expected)
    assert expected == pytest.approx(0.316226, rel=1e-5)


def test_two_identical_steps_accumulate_geometric_series():
    c = 0.7
    theta = np.zeros(2)
    state = AdamState.zeros(2)
    cfg = AdamConfig(lr=0.01)
    for _ in range(2):
        adam_step(state, theta, grad([(0, c)], 2), cfg)
    assert state.m[0] == pytest.approx(c * (1 - cfg.beta1 ** 2))
    assert state.v[0] == pytest.approx(c * c * (1 - cfg.beta2 ** 2))


def test_random_steps_match_direct_formula():
    rng = np.random.default_rng(12)
    cfg = AdamConfig(lr=0.05, beta1=0.9, beta2=0.999, eps=1e-8)
    dim = 10
    theta = rng.normal(size=dim)
    state = AdamState(rng.normal(size=dim) * 0.1, np.abs(rng.normal(size=dim)) * 0.1)
    for _ in range(100):
        n = int(rng.integers(1, dim))
        keys = np.sort(rng.choice(dim, size=n, replace=False))
        g = SparseGradient(keys, rng.normal(size=n), dim)
        m0, v0, t0 = state.m.copy(), state.v.copy(), theta.copy()
        adam_step(state, theta, g, cfg)
        for k, gk in zip(g.keys.tolist(), g.values.tolist()):
            m = cfg.beta1 * m0[k] + (1 - cfg.beta1) * gk
            v = cfg.beta2 * v0[k] + (1 - cfg.beta2) * gk * gk
            assert abs(state.m[k] - m) < 1e-12
            assert abs(state.v[k] - v) < 1e-12
            assert abs(theta[k] - (t0[k] - cfg.lr * m / np.sqrt(v + cfg.eps))) < 1e-12


def test_positive_gradient_from_rest_decreases_theta():
    theta = np.full(3, 0.5)
    state = AdamState.zeros(3)
    adam_step(state, theta, grad([(1, 2.0)], 3), AdamConfig(lr=0.01))
    assert theta[1] < 0.5


def test_untouched_coordinates_stay_exactly_put():
    rng = np.random.default_rng(1)
    dim = 50
    theta = rng.normal(size=dim)
    snapshot = theta.copy()
    state = AdamState.zeros(dim)
    cfg = AdamConfig(lr=0.1)
    for seed in range(10):
        keys = np.sort(np.random.default_rng(seed).choice(25, size=5, replace=False))
        adam_step(state, theta, SparseGradient(keys, np.ones(5), dim), cfg)
    assert np.array_equal(theta[25:], snapshot[25:])
    assert not state.m[25:].any() and not state.v[25:].any()


def test_dense_mode_matches_sparse_on_first_touch():
    dim = 6
    g = grad([(2, 1.5), (4, -0.5)], dim)
    cfg = AdamConfig(lr=0.1)
    theta_s, theta_d = np.zeros(dim), np.zeros(dim)
    state_s, state_d = AdamState.zeros(dim), AdamState.zeros(dim)
    adam_step(state_s, theta_s, g, cfg)
    adam_step(state_d, theta_d, g, cfg, dense=True)
    np.testing.assert_allclose(theta_s, theta_d, atol=1e-15)
    np.testing.assert_allclose(state_s.m, state_d.m, atol=1e-15)


def test_out_of_range_key_rejected():
    with pytest.raises(ValueError):
        adam_step(AdamState.zeros(2), np.zeros(2), grad([(5, 1.0)], 10), AdamConfig(lr=0.1))


def test_adam_config_validation():
    with pytest.raises(ValueError):
        AdamConfig(lr=0.0)
    with pytest.raises(ValueError):
        AdamConfig(lr=0.1, beta1=1.0)
    with pytest.raises(ValueError):
        AdamConfig(lr=0.1, eps=0.0)
