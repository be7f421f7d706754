import numpy as np
import pytest

from gradcheck import network_error
from oracles import reference_forward_inference, reference_shapes_256
from rfdose.condnet import layers as L
from rfdose.condnet.network import (Architecture, audit_shapes, build_network, forward, loss_and_gradients,
                                    table_shapes)
from rfdose.errors import DomainError


def test_reference_configuration_shapes():
    observed, expected = audit_shapes(build_network(Architecture(256, 6)))
    ref = reference_shapes_256()
    for name, shape in ref.items():
        assert tuple(observed[name]) == shape, name
        assert tuple(expected[name]) == shape, name


@pytest.mark.parametrize("size, depth", [(16, 3), (32, 3), (32, 4), (64, 4)])
def test_shapes_follow_size_algebra(size, depth):
    observed, expected = audit_shapes(build_network(Architecture(size, depth)))
    for name, shape in expected.items():
        assert tuple(observed[name]) == shape, name


@pytest.mark.parametrize("size, depth", [(8, 3), (48, 3), (32, 5), (64, 2)])
def test_invalid_architectures(size, depth):
    with pytest.raises(DomainError):
        Architecture(size, depth)


def test_forward_matches_naive_replay():
    params = build_network(Architecture(16, 3), seed=5)
    rng = np.random.default_rng(1)
    for st in params.bn_stats.values():
        st["mean"][:] = rng.standard_normal(st["mean"].shape) * 0.1
        st["var"][:] = rng.uniform(0.5, 1.5, st["var"].shape)
    t1, t2 = rng.uniform(size=(2, 16, 16)), rng.uniform(size=(2, 16, 16))
    out = forward(params, t1, t2)
    ref = reference_forward_inference(params.weights, params.bn_stats, np.stack([t1, t2], 1), 3, 3)
    np.testing.assert_allclose(out, ref, rtol=1e-10, atol=1e-12)


def test_outputs_in_unit_interval_and_deterministic():
    a = build_network(Architecture(32, 3), seed=7)
    b = build_network(Architecture(32, 3), seed=7)
    rng = np.random.default_rng(0)
    t1, t2 = rng.uniform(size=(32, 32)), rng.uniform(size=(32, 32))
    out = forward(a, t1, t2)
    assert out.shape == (3, 32, 32)
    assert np.all((out > 0) & (out < 1))
    np.testing.assert_array_equal(out, forward(b, t1, t2))
    assert not build_network(Architecture(32, 3), seed=8).allclose(a)


def test_composed_gradient():
    err, where = network_error(16)
    assert err < 1e-5, where


def test_sigmoid_toy_gradient():
    # all-zero weights give outputs 0.5 against a target of 1: loss 0.25, d/dbias of the last map = -0.25
    params = build_network(Architecture(16, 3))
    for k in params.weights:
        if not k.endswith("gamma"):
            params.weights[k][...] = 0.0
    x = np.zeros((1, 2, 16, 16))
    y = np.ones((1, 3, 16, 16))
    loss, grads = loss_and_gradients(params, x, y, train=False)
    assert loss == pytest.approx(0.25)
    for v in (1, 2, 3):
        assert grads[f"br{v}.map1.b"][0] == pytest.approx(-0.25 / 3)
    # hand check of the same number through the layer primitives
    out, cache = L.sigmoid_forward(np.zeros((1, 1, 1, 1)))
    _, g = L.mse_loss(out, np.ones_like(out))
    assert L.sigmoid_backward(g, cache)[0, 0, 0, 0] == pytest.approx(-0.25)


def test_shape_mismatches_raise():
    params = build_network(Architecture(16, 3))
    with pytest.raises(DomainError):
        forward(params, np.zeros((16, 16)), np.zeros((16, 8)))
    with pytest.raises(DomainError):
        forward(params, np.zeros((32, 32)), np.zeros((32, 32)))
    with pytest.raises(DomainError):
        loss_and_gradients(params, np.zeros((1, 2, 16, 16)), np.zeros((1, 2, 16, 16)))


def test_table_shapes_cover_every_layer():
    params = build_network(Architecture(32, 4))
    observed, expected = audit_shapes(params)
    assert set(expected) <= set(observed)
    assert table_shapes(params.arch)["br1.map1.sigmoid"] == (32, 32)
