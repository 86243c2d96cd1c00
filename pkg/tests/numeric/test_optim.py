import numpy as np
import pytest

from cannav.core.errors import DimensionError, NonFiniteError
from cannav.numeric.optim import Adam, AdamState, adam_step, linear_lr
from cannav.numeric.tensor import Tensor


def _params(rng):
    return {"w": Tensor(rng.normal(size=(2, 3)), requires_grad=True), "b": Tensor(np.zeros(3), requires_grad=True)}


def test_zero_gradients_leave_parameters_unchanged(rng):
    params = _params(rng)
    before = {k: p.data.copy() for k, p in params.items()}
    adam_step(params, {k: np.zeros_like(p.data) for k, p in params.items()}, AdamState(), lr=1e-3)
    for k, p in params.items():
        np.testing.assert_array_equal(p.data, before[k])


def test_zero_learning_rate_leaves_parameters_unchanged(rng):
    params = _params(rng)
    before = {k: p.data.copy() for k, p in params.items()}
    adam_step(params, {k: np.ones_like(p.data) for k, p in params.items()}, AdamState(), lr=0.0)
    for k, p in params.items():
        np.testing.assert_array_equal(p.data, before[k])


def test_first_step_matches_hand_unrolled_update():
    state = AdamState()
    param = Tensor(np.array(0.5), requires_grad=True)
    lr = 1e-3
    adam_step({"p": param}, {"p": np.array(1.0)}, state, lr)
    m = (1 - 0.9) * 1.0
    v = (1 - 0.999) * 1.0
    m_hat = m / (1 - 0.9)
    v_hat = v / (1 - 0.999)
    expected = 0.5 - lr * m_hat / (np.sqrt(v_hat) + 1e-8)
    assert float(param.data) == pytest.approx(expected, abs=1e-15)
    assert float(param.data) == pytest.approx(0.5 - lr / (1 + 1e-8), abs=1e-12)
    assert state.step == 1


def test_step_counter_increases_and_moments_match_shapes(rng):
    params = _params(rng)
    state = AdamState()
    for expected in (1, 2, 3):
        adam_step(params, {k: rng.normal(size=p.shape) for k, p in params.items()}, state, 1e-3)
        assert state.step == expected
    assert state.m["w"].shape == (2, 3)
    assert state.v["b"].shape == (3,)


def test_non_finite_gradient_names_parameter(rng):
    params = _params(rng)
    grads = {"w": np.full((2, 3), np.nan), "b": np.zeros(3)}
    with pytest.raises(NonFiniteError) as exc:
        adam_step(params, grads, AdamState(), 1e-3)
    assert "'w'" in exc.value.message


def test_gradient_shape_mismatch(rng):
    params = _params(rng)
    with pytest.raises(DimensionError):
        adam_step(params, {"w": np.zeros((3, 2))}, AdamState(), 1e-3)


def test_adam_minimises_quadratic():
    x = Tensor(np.array([3.0, -2.0]), requires_grad=True)
    opt = Adam({"x": x})
    for _ in range(500):
        opt.zero_grad()
        (x * x).sum().backward()
        opt.step(0.05)
    assert np.all(np.abs(x.data) < 1e-2)


def test_linear_lr_schedule():
    assert linear_lr(0, 100, 1e-4) == 1e-4
    assert linear_lr(100, 100, 1e-4) == 0.0
    assert linear_lr(50, 100, 1e-4) == pytest.approx(5e-5)


def test_linear_lr_clamps_past_the_end():
    assert linear_lr(150, 100, 1e-4) == 0.0
    assert linear_lr(151, 100, 1e-4) == 0.0
