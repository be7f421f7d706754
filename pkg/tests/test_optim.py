import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfdose.condnet.optim import AdamState, adam_step


@given(st.floats(-1e3, 1e3).filter(lambda g: abs(g) > 1e-3))
def test_first_step_moves_by_learning_rate_against_gradient(g):
    params = {"w": np.array([0.5])}
    state = AdamState.zeros_like(params)
    adam_step(params, {"w": np.array([g])}, state, lr=1e-3)
    assert params["w"][0] - 0.5 == pytest.approx(-np.sign(g) * 1e-3, rel=1e-4)
    assert state.t == 1


def test_zero_gradient_leaves_parameters():
    params = {"w": np.arange(3.0)}
    state = AdamState.zeros_like(params)
    for _ in range(3):
        adam_step(params, {"w": np.zeros(3)}, state)
    np.testing.assert_array_equal(params["w"], np.arange(3.0))


def test_minimises_quadratic():
    params = {"w": np.array([3.0, -2.0])}
    state = AdamState.zeros_like(params)
    for _ in range(3000):
        adam_step(params, {"w": 2 * params["w"]}, state, lr=1e-2)
    assert np.all(np.abs(params["w"]) < 1e-2)


def test_shape_mismatch():
    params = {"w": np.zeros(2)}
    with pytest.raises(ValueError):
        adam_step(params, {"w": np.zeros(3)}, AdamState.zeros_like(params))
