import numpy as np
import pytest

from swarmoff.drl.network import (
    AdamState,
    adam_step,
    backward,
    forward,
    init_network,
)
from swarmoff.verify import _oracle_forward_scalar, gradient_check


def test_init_shapes_and_determinism():
    net = init_network([6, 8, 8, 8, 4], seed=3)
    assert net.dims == (6, 8, 8, 8, 4)
    net2 = init_network([6, 8, 8, 8, 4], seed=3)
    for a, b in zip(net.params, net2.params):
        assert np.array_equal(a, b)
    assert all(np.all(b == 0) for b in net.biases)


def test_zero_network_outputs_zero():
    net = init_network([5, 7, 3], seed=0)
    for w in net.weights:
        w[:] = 0.0
    out = forward(net, np.ones(5))
    assert np.array_equal(out, np.zeros(3))


def test_forward_deterministic_and_bounded():
    net = init_network([6, 8, 8, 8, 4], seed=1)
    s = np.random.default_rng(2).normal(size=6)
    a = forward(net, s)
    b = forward(net, s)
    assert np.array_equal(a, b)
    assert np.all(np.abs(a) < 1.0)  # Tanh range


def test_forward_matches_scalar_oracle():
    rng = np.random.default_rng(5)
    for _ in range(5):
        net = init_network([4, 6, 6, 6, 3], rng)
        s = rng.normal(size=4)
        assert forward(net, s) == pytest.approx(_oracle_forward_scalar(net, s), abs=1e-12)


def test_forward_batch_consistent_with_single():
    rng = np.random.default_rng(6)
    net = init_network([4, 5, 5, 5, 3], rng)
    batch = rng.normal(size=(7, 4))
    q = forward(net, batch)
    for i in range(7):
        assert q[i] == pytest.approx(forward(net, batch[i]), abs=1e-14)


def test_forward_rejects_dimension_mismatch():
    net = init_network([4, 5, 3], seed=0)
    with pytest.raises(ValueError):
        forward(net, np.zeros(5))


def test_backward_zero_at_minimum():
    rng = np.random.default_rng(7)
    net = init_network([4, 6, 6, 6, 3], rng)
    s = rng.normal(size=(5, 4))
    a = rng.integers(0, 3, size=5)
    targets = forward(net, s)[np.arange(5), a]  # already perfect
    grads, loss = backward(net, s, a, targets)
    assert loss == pytest.approx(0.0, abs=1e-24)
    for g in grads:
        assert np.allclose(g, 0.0, atol=1e-15)


def test_backward_mean_invariance_under_duplication():
    rng = np.random.default_rng(8)
    net = init_network([4, 6, 6, 6, 3], rng)
    s = rng.normal(size=(1, 4))
    a = np.array([1])
    t = np.array([0.3])
    g1, l1 = backward(net, s, a, t)
    g4, l4 = backward(net, np.repeat(s, 4, axis=0), np.repeat(a, 4), np.repeat(t, 4))
    assert l1 == pytest.approx(l4, rel=1e-12)
    for a_, b_ in zip(g1, g4):
        assert np.allclose(a_, b_, atol=1e-14)


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(9)
    err = gradient_check([5, 7, 7, 7, 4], batch=4, rng=rng)
    assert err < 1e-4


def test_adam_zero_gradient_is_identity():
    net = init_network([3, 4, 2], seed=1)
    before = [p.copy() for p in net.params]
    state = AdamState.for_params(net.params)
    adam_step(net.params, [np.zeros_like(p) for p in net.params], state, lr=0.1)
    for a, b in zip(before, net.params):
        assert np.array_equal(a, b)


def test_adam_first_step_magnitude_is_lr():
    x = np.array([10.0, -4.0, 0.5])
    state = AdamState.for_params([x])
    g = np.array([100.0, -3.0, 0.004])
    adam_step([x], [g], state, lr=0.05)
    # bias-corrected first step moves every coordinate by ~lr against the sign
    assert np.allclose(np.abs(x - [10.0, -4.0, 0.5]), 0.05, rtol=1e-5)
    assert x[0] < 10.0 and x[1] > -4.0 and x[2] < 0.5


def test_adam_converges_on_quadratic():
    x = np.array([0.0])
    state = AdamState.for_params([x])
    for _ in range(5000):
        adam_step([x], [2.0 * (x - 3.0)], state, lr=0.05)
        if abs(x[0] - 3.0) < 1e-3:
            break
    assert abs(x[0] - 3.0) < 1e-3


def test_network_copy_is_deep():
    net = init_network([3, 4, 2], seed=2)
    dup = net.copy()
    dup.weights[0][0, 0] += 1.0
    assert net.weights[0][0, 0] != dup.weights[0][0, 0]


def test_assert_finite_catches_nan():
    net = init_network([3, 4, 2], seed=2)
    net.weights[0][0, 0] = np.nan
    with pytest.raises(FloatingPointError):
        net.assert_finite()
