import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from motorbnn import model as m
from motorbnn.errors import DivergenceError, ShapeError
from oracles import central_difference

HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def sigmoid(z):
    return 1.0 / (1.0 + math.exp(-z))


def test_parameter_count_and_layout():
    shape = m.NetworkShape(5, (5,))
    assert shape.n_params == (5 + 1) * 5 + (5 + 1) * 1 == 36
    assert m.NetworkShape(3, (4, 2)).n_params == 4 * 4 + 5 * 2 + 3 * 1
    assert m.NetworkShape(1, ()).n_params == 2
    (W1, b1), (W2, b2) = shape.unflatten(np.arange(36.0))
    assert W1.shape == (5, 5) and W1[0, 1] == 1.0 and b1[0] == 25.0
    assert W2.shape == (5, 1) and b2[0] == 35.0
    with pytest.raises(ShapeError):
        m.NetworkShape(0)
    with pytest.raises(ShapeError):
        m.NetworkParams(np.zeros(3), shape)


def test_zero_network_outputs_half():
    shape = m.NetworkShape(4, (5,))
    params = m.NetworkParams(np.zeros(shape.n_params), shape)
    assert m.forward(params, [1.0, -2.0, 3.0, 100.0]) == 0.5


def test_single_hidden_unit_by_hand():
    shape = m.NetworkShape(2, (1,))
    a, b, c, d, e = 0.7, -1.3, 0.2, 2.5, -0.4
    params = m.NetworkParams([a, b, c, d, e], shape)
    x = [0.9, 0.3]
    expected = sigmoid(d * math.tanh(a * x[0] + b * x[1] + c) + e)
    assert m.forward(params, x) == pytest.approx(expected, rel=1e-14)


def test_forward_dimension_mismatch():
    shape = m.NetworkShape(3)
    with pytest.raises(ShapeError):
        m.forward(m.NetworkParams(np.zeros(shape.n_params), shape), [1.0, 2.0])


def _flip_unit(shape, w, unit):
    """Negate all weights into and out of one unit of the first hidden layer."""
    w = w.copy()
    (W1, b1), (W2, _), *rest = shape.unflatten(w)
    W1[:, unit] *= -1
    b1[unit] *= -1
    W2[unit, :] *= -1
    return w


def test_tanh_sign_flip_symmetry():
    rng = np.random.default_rng(0)
    shape = m.NetworkShape(3, (4,))
    w = rng.normal(size=shape.n_params)
    flipped = _flip_unit(shape, w, 2)
    data = m.Dataset(rng.normal(size=(10, 3)), rng.integers(0, 2, 10))
    cfg = m.ModelConfig()
    X = data.X
    np.testing.assert_allclose(m.predict(flipped, X, shape), m.predict(w, X, shape), rtol=1e-14)
    assert m.log_likelihood(flipped, data, cfg, shape) == pytest.approx(
        m.log_likelihood(w, data, cfg, shape), rel=1e-13)
    assert m.log_prior(flipped, cfg) == m.log_prior(w, cfg)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31), st.floats(0.1, 200.0))
def test_forward_strictly_inside_unit_interval(seed, scale):
    rng = np.random.default_rng(seed)
    shape = m.NetworkShape(3, (5,))
    w = rng.normal(size=shape.n_params) * scale
    p = m.predict(w, rng.normal(size=(20, 3)) * scale, shape)
    assert np.all(p > 0) and np.all(p < 1)


def test_log_prior_values():
    cfg = m.ModelConfig(1.0)
    assert m.log_prior(np.zeros(1), cfg) == pytest.approx(-0.9189385332046727, abs=1e-12)
    assert m.log_prior(np.ones(1), cfg) == pytest.approx(-HALF_LOG_2PI - 0.5, abs=1e-12)
    d = 7
    gain = m.log_prior(np.zeros(d), m.ModelConfig(2.0)) - m.log_prior(np.zeros(d), cfg)
    assert gain == pytest.approx(d * 0.5 * math.log(2), abs=1e-12)


def test_log_likelihood_values():
    shape = m.NetworkShape(2, (3,))
    zero = np.zeros(shape.n_params)
    n = 6
    X = np.random.default_rng(1).normal(size=(n, 2))
    data = m.Dataset(X, [0, 1, 1, 0, 1, 0])
    assert m.log_likelihood(zero, data, m.ModelConfig(), shape) == pytest.approx(n * math.log(0.5))
    data0 = m.Dataset(X, np.zeros(n))
    assert m.log_likelihood(zero, data0, m.ModelConfig(likelihood="gaussian"), shape) == \
        pytest.approx(n * (-HALF_LOG_2PI - 0.125))


def test_confident_prediction_costs_nothing():
    shape = m.NetworkShape(1, ())
    w = np.array([50.0, 0.0])
    data = m.Dataset([[1.0], [-1.0]], [1, 0])
    ll = m.log_likelihood(w, data, m.ModelConfig(), shape)
    assert -1e-11 < ll <= 0
    # beyond the clamp the penalty is bounded by log(1e-12)
    wrong = m.Dataset([[1.0]], [0])
    assert m.log_likelihood(w, wrong, m.ModelConfig(), shape) == pytest.approx(math.log(1e-12))


def test_log_joint_is_sum_of_parts():
    rng = np.random.default_rng(2)
    for likelihood in m.LIKELIHOODS:
        shape = m.NetworkShape(4, (3, 2))
        w = rng.normal(size=shape.n_params)
        data = m.Dataset(rng.normal(size=(9, 4)), rng.integers(0, 2, 9))
        cfg = m.ModelConfig(0.7, likelihood)
        assert m.log_joint(w, data, cfg, shape) == pytest.approx(
            m.log_likelihood(w, data, cfg, shape) + m.log_prior(w, cfg), rel=1e-14)


def test_log_joint_zero_network_single_item():
    shape = m.NetworkShape(5, (5,))
    d = shape.n_params
    data = m.Dataset([[0.3] * 5], [1])
    value = m.log_joint(np.zeros(d), data, m.ModelConfig(), shape)
    assert value == pytest.approx(math.log(0.5) - d * HALF_LOG_2PI, rel=1e-14)


def test_zero_network_gradient_is_output_bias_residual():
    rng = np.random.default_rng(3)
    shape = m.NetworkShape(3, (4,))
    data = m.Dataset(rng.normal(size=(11, 3)), rng.integers(0, 2, 11))
    cfg = m.ModelConfig()
    w0 = np.zeros(shape.n_params)
    g = m.grad_log_joint(w0, data, cfg, shape)
    fd = central_difference(lambda v: m.log_joint(v, data, cfg, shape), w0)
    expected = np.zeros(shape.n_params)
    expected[-1] = np.sum(data.y - 0.5)
    np.testing.assert_allclose(g, expected, atol=1e-12)
    np.testing.assert_allclose(g, fd, atol=1e-8)


def test_prior_gradient_is_minus_lambda_w():
    w = np.random.default_rng(4).normal(size=17)
    np.testing.assert_array_equal(m.grad_log_prior(w, m.ModelConfig(2.5)), -2.5 * w)


def random_configuration(rng, i):
    n_in = int(rng.integers(1, 7))
    hidden = [(), (3,), (5,), (4, 3)][i % 4]
    shape = m.NetworkShape(n_in, hidden)
    n = int(rng.integers(5, 30))
    data = m.Dataset(rng.normal(size=(n, n_in)), rng.integers(0, 2, n))
    cfg = m.ModelConfig(float(rng.uniform(0.5, 2.0)), m.LIKELIHOODS[i % 2])
    return shape, data, cfg, rng.normal(size=shape.n_params)


def max_relative_gradient_error(shape, data, cfg, w):
    g = m.grad_log_joint(w, data, cfg, shape)
    fd = central_difference(lambda v: m.log_joint(v, data, cfg, shape), w, h=1e-5)
    return float(np.max(np.abs(g - fd) / np.maximum(np.maximum(np.abs(fd), np.abs(g)), 1e-8)))


@pytest.mark.parametrize("i", range(10))
def test_gradient_matches_finite_differences(i):
    rng = np.random.default_rng(100 + i)
    assert max_relative_gradient_error(*random_configuration(rng, i)) <= 1e-5


def test_value_and_gradient_agree_with_separate_calls():
    rng = np.random.default_rng(5)
    shape, data, cfg, w = random_configuration(rng, 3)
    value, grad = m.log_joint_and_grad(w, shape, data, cfg)
    assert value == m.log_joint(w, data, cfg, shape)
    np.testing.assert_array_equal(grad, m.grad_log_joint(w, data, cfg, shape))


def test_map_leaves_stationary_point_alone():
    shape = m.NetworkShape(2, (3,))
    data = m.Dataset([[1.0, 2.0], [-1.0, 0.5]], [0, 1])  # balanced: zero gradient at w = 0
    init = m.NetworkParams(np.zeros(shape.n_params), shape)
    fit = m.map_estimate(data, m.ModelConfig(), shape, init, steps=50, learning_rate=0.1)
    np.testing.assert_array_equal(fit.params.w, init.w)
    assert fit.improved


def test_map_separates_linearly_separable_data():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(40, 2))
    y = (X[:, 0] + 0.5 * X[:, 1] > 0).astype(float)
    X += np.where(y[:, None] > 0, 0.3, -0.3) * np.array([1.0, 0.5])  # widen the margin
    data = m.Dataset(X, y)
    shape = m.NetworkShape(2, (5,))
    init = m.init_params(shape, m.ModelConfig(), np.random.default_rng(0))
    fit = m.map_estimate(data, m.ModelConfig(), shape, init, steps=2000, learning_rate=0.01)
    acc = np.mean((m.predict(fit.params, X) >= 0.5) == (y == 1))
    assert acc == 1.0
    assert fit.improved and fit.final_log_joint > fit.initial_log_joint


def test_map_decreases_squared_error_loss_without_hidden_layer():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(30, 3))
    y = (X @ np.array([1.0, -2.0, 0.5]) + 0.3 * rng.normal(size=30) > 0).astype(float)
    data = m.Dataset(X, y)
    shape = m.NetworkShape(3, ())
    cfg = m.ModelConfig(0.5, "gaussian")
    params = m.init_params(shape, cfg, np.random.default_rng(1))
    losses = [m.squared_error_loss(params, data, cfg.lam)]
    for _ in range(20):
        params = m.map_estimate(data, cfg, shape, params, steps=10, learning_rate=0.02).params
        losses.append(m.squared_error_loss(params, data, cfg.lam))
    assert all(b <= a + 1e-12 for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]
    # the loss is -2 x log joint up to a constant
    c0 = losses[0] + 2 * m.log_joint(m.init_params(shape, cfg, np.random.default_rng(1)),
                                     data, cfg, shape)
    c1 = losses[-1] + 2 * m.log_joint(params, data, cfg, shape)
    assert c0 == pytest.approx(c1, rel=1e-12)


def test_map_divergence_names_step():
    shape = m.NetworkShape(1, ())
    data = m.Dataset([[1.0]], [1])
    init = m.NetworkParams([1.0, 1.0], shape)
    with np.errstate(all="ignore"), pytest.raises(DivergenceError) as info:
        m.map_estimate(data, m.ModelConfig(), shape, init, steps=10, learning_rate=1e200)
    assert info.value.step is not None and "step" in str(info.value)


def test_model_config_validation():
    with pytest.raises(ValueError):
        m.ModelConfig(0.0)
    with pytest.raises(ValueError):
        m.ModelConfig(likelihood="poisson")
