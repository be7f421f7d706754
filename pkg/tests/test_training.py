import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from rfdose.condnet.network import Architecture, forward
from rfdose.condnet.training import (ORIENTATIONS, TrainConfig, average_orientations, extract_slices,
                                     fit_to_size, predict_volume, stack_slices, train_network,
                                     unfit_from_size)
from rfdose.errors import DomainError
from rfdose.io import load_checkpoint, save_checkpoint

vols = arrays(np.float64, st.tuples(*(st.integers(1, 5),) * 3), elements=st.floats(-10, 10))


@given(vols)
def test_orientation_index_identity(v):
    ax = extract_slices(v, "axial")
    co = extract_slices(v, "coronal")
    sa = extract_slices(v, "sagittal")
    nx, ny, nz = v.shape
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                assert ax[k][i][j] == v[i, j, k]
                assert co[j][i][k] == v[i, j, k]
                assert sa[i][j][k] == v[i, j, k]
                assert ax[k][i][j] == co[j][i][k]


@given(vols, st.sampled_from(ORIENTATIONS))
def test_restack_round_trip(v, o):
    np.testing.assert_array_equal(stack_slices(extract_slices(v, o), o), v)


@given(vols, st.integers(1, 7))
def test_fit_unfit_restores_retained_region(v, n):
    back = unfit_from_size(fit_to_size(v, n), v.shape)
    keep = tuple(slice((d - n) // 2, (d - n) // 2 + n) if d > n else slice(None) for d in v.shape)
    np.testing.assert_array_equal(back[keep], v[keep])


def test_average_orientations():
    a, b, c = np.zeros((2, 2)), np.ones((2, 2)), np.full((2, 2), 5.0)
    np.testing.assert_array_equal(average_orientations([a, b, c]), np.full((2, 2), 2.0))


def _toy_data(n=4, size=16, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, 2, size, size))
    y = np.stack([x[:, 0], x[:, 1], 0.5 * (x[:, 0] + x[:, 1])], axis=1)
    return x, y


def test_training_is_deterministic_and_reduces_loss():
    x, y = _toy_data()
    cfg = TrainConfig(epochs=10, batch_size=2, seed=3)
    a = train_network(x, y, cfg, Architecture(16, 3))
    b = train_network(x, y, cfg, Architecture(16, 3))
    assert [t[2] for t in a.trace] == [t[2] for t in b.trace]
    assert a.params.allclose(b.params, rtol=0, atol=0)
    assert np.mean([t[2] for t in a.trace[-4:]]) < np.mean([t[2] for t in a.trace[:4]])


def test_max_steps_limits_training():
    x, y = _toy_data()
    res = train_network(x, y, TrainConfig(epochs=5, batch_size=1, max_steps=3), Architecture(16, 3))
    assert len(res.trace) == 3


def test_checkpoint_round_trip(tmp_path):
    x, y = _toy_data()
    res = train_network(x, y, TrainConfig(epochs=2, batch_size=2), Architecture(16, 3))
    path = save_checkpoint(res.params, tmp_path / "net.ckpt", config={"lr": 1e-3})
    loaded, header = load_checkpoint(path)
    assert header["config"] == {"lr": 1e-3}
    assert loaded.arch == res.params.arch
    assert loaded.manifest() == res.params.manifest()
    np.testing.assert_array_equal(forward(loaded, x[:, 0], x[:, 1]), forward(res.params, x[:, 0], x[:, 1]))


def test_predict_volume_shape_and_range():
    x, y = _toy_data()
    res = train_network(x, y, TrainConfig(epochs=1, batch_size=2), Architecture(16, 3))
    t1 = np.random.default_rng(0).uniform(size=(12, 16, 18))
    out = predict_volume(res.params, t1, t1, "coronal")
    assert out.shape == (3, 12, 16, 18)
    assert np.all((out >= 0) & (out <= 1))


def test_config_validation():
    with pytest.raises(DomainError):
        TrainConfig(lr=0)
    with pytest.raises(DomainError):
        TrainConfig(orientation="oblique")
    with pytest.raises(DomainError):
        extract_slices(np.zeros((2, 2, 2)), "oblique")


def test_zero_epochs_leaves_initialisation():
    x, y = _toy_data()
    res = train_network(x, y, TrainConfig(epochs=0, seed=4), Architecture(16, 3))
    from rfdose.condnet.network import build_network

    assert res.trace == [] and res.params.allclose(build_network(Architecture(16, 3), seed=4), rtol=0, atol=0)


def test_single_slice_loss_is_monotone_with_small_lr():
    from synthetic import partial_volume_slices

    x, y = partial_volume_slices(1, 16, seed=2)
    res = train_network(x, y, TrainConfig(epochs=40, batch_size=1, lr=1e-4), Architecture(16, 3))
    losses = np.array([t[2] for t in res.trace])
    assert np.all(np.diff(losses) <= 0)
