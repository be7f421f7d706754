import numpy as np
import pytest

from gradcheck import layer_errors
from oracles import batchnorm_naive, conv2d_naive, deconv2d_naive, maxpool_naive, sigmoid
from rfdose.condnet import layers as L

rng = np.random.default_rng(42)


@pytest.fixture(scope="module")
def errors():
    return layer_errors()


@pytest.mark.parametrize("kind", ["conv3x3", "conv3x3_stride2", "conv1x1", "deconv4x4_stride2",
                                  "deconv4x4_stride4", "batchnorm_train", "batchnorm_eval", "relu",
                                  "maxpool", "sigmoid", "concat", "mse"])
def test_gradient_matches_finite_differences(errors, kind):
    assert errors[kind] < 1e-6


@pytest.mark.parametrize("stride, pad, k", [(1, 1, 3), (2, 1, 3), (1, 0, 1)])
def test_conv_matches_naive(stride, pad, k):
    x = rng.standard_normal((2, 3, 8, 8))
    w = rng.standard_normal((5, 3, k, k))
    b = rng.standard_normal(5)
    out, _ = L.conv_forward(x, w, b, stride, pad)
    np.testing.assert_allclose(out, conv2d_naive(x, w, b, stride, pad), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("stride, pad", [(2, 1), (4, 0)])
def test_deconv_matches_naive_scatter(stride, pad):
    x = rng.standard_normal((2, 3, 4, 4))
    w = rng.standard_normal((3, 2, 4, 4))
    b = rng.standard_normal(2)
    out, _ = L.deconv_forward(x, w, b, stride, pad)
    assert out.shape == (2, 2, 4 * stride, 4 * stride)
    np.testing.assert_allclose(out, deconv2d_naive(x, w, b, stride, pad), rtol=1e-12, atol=1e-12)


def test_maxpool_matches_naive():
    x = rng.standard_normal((2, 3, 6, 8))
    np.testing.assert_array_equal(L.maxpool_forward(x)[0], maxpool_naive(x))


def test_maxpool_ties_route_gradient_to_first_element():
    x = np.ones((1, 1, 2, 2))
    out, cache = L.maxpool_forward(x)
    dx = L.maxpool_backward(np.ones_like(out), cache)
    np.testing.assert_array_equal(dx[0, 0], [[1, 0], [0, 0]])


def test_batchnorm_eval_matches_naive():
    x = rng.standard_normal((3, 4, 5, 5))
    gamma, beta = rng.uniform(0.5, 2, 4), rng.standard_normal(4)
    stats = {"mean": rng.standard_normal(4), "var": rng.uniform(0.1, 2, 4)}
    out, _ = L.batchnorm_forward(x, gamma, beta, stats, train=False)
    np.testing.assert_allclose(out, batchnorm_naive(x, gamma, beta, stats["mean"], stats["var"]), rtol=1e-12)


def test_batchnorm_train_normalises_and_updates_running_stats():
    x = rng.standard_normal((4, 2, 3, 3)) * 3 + 5
    stats = {"mean": np.zeros(2), "var": np.ones(2)}
    out, _ = L.batchnorm_forward(x, np.ones(2), np.zeros(2), stats, train=True, momentum=0.1)
    np.testing.assert_allclose(out.mean(axis=(0, 2, 3)), 0, atol=1e-12)
    np.testing.assert_allclose(out.var(axis=(0, 2, 3)), 1, rtol=1e-4)
    np.testing.assert_allclose(stats["mean"], 0.1 * x.mean(axis=(0, 2, 3)))
    n = 4 * 9
    np.testing.assert_allclose(stats["var"], 0.9 + 0.1 * x.var(axis=(0, 2, 3)) * n / (n - 1))


def test_sigmoid_is_stable_for_large_inputs():
    x = np.array([-1000.0, -30.0, 0.0, 30.0, 1000.0])
    out, _ = L.sigmoid_forward(x)
    assert np.all(np.isfinite(out))
    np.testing.assert_allclose(out[1:4], sigmoid(x[1:4]))
    assert out[0] == 0.0 and out[-1] == 1.0


def test_relu_and_concat_round_trip():
    a, b = rng.standard_normal((1, 2, 2, 2)), rng.standard_normal((1, 3, 2, 2))
    cat, sizes = L.concat_forward([a, b])
    da, db = L.concat_backward(cat, sizes)
    np.testing.assert_array_equal(da, a)
    np.testing.assert_array_equal(db, b)
    out, mask = L.relu_forward(a)
    assert np.all(out >= 0) and np.array_equal(L.relu_backward(np.ones_like(a), mask), (a > 0) * 1.0)


def test_mse_hand_value():
    loss, grad = L.mse_loss(np.array([0.0, 1.0]), np.array([1.0, 1.0]))
    assert loss == 0.5
    np.testing.assert_array_equal(grad, [-1.0, 0.0])
