import math

import numpy as np
import pytest

from trajicl.numerics import (
    NonFiniteGradientError,
    OptimizerState,
    Tensor,
    adamw_step,
    clip_grad_norm,
    cosine_lr,
)


def reference_adamw(g_seq, lr, b1=0.9, b2=0.999, eps=1e-8, wd=0.0, theta0=0.0):
    """Scalar reference: plain Adam with bias correction plus decoupled decay."""
    theta, m, v = theta0, 0.0, 0.0
    out = []
    for t, g in enumerate(g_seq, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mhat = m / (1 - b1**t)
        vhat = v / (1 - b2**t)
        theta -= lr * mhat / (math.sqrt(vhat) + eps)
        theta -= lr * wd * theta
        out.append(theta)
    return out


def test_zero_gradient_no_decay_leaves_params_unchanged():
    p = {"w": Tensor(np.full((3,), 1.5, dtype=np.float32), requires_grad=True)}
    state = OptimizerState(weight_decay=0.0)
    adamw_step(p, {"w": np.zeros(3, dtype=np.float32)}, state, lr=0.1)
    assert np.array_equal(p["w"].data, np.full(3, 1.5, dtype=np.float32))


def test_zero_gradient_with_decay_shrinks_exactly():
    p = {"w": Tensor(np.full((4,), 2.0, dtype=np.float32), requires_grad=True)}
    state = OptimizerState(weight_decay=0.01)
    adamw_step(p, {"w": np.zeros(4, dtype=np.float32)}, state, lr=0.5)
    assert np.allclose(p["w"].data, 2.0 * (1 - 0.5 * 0.01), rtol=0, atol=0)


def test_constant_gradient_matches_scalar_reference():
    p = {"w": Tensor(np.zeros((), dtype=np.float64), requires_grad=True)}
    state = OptimizerState(weight_decay=0.0)
    trajectory = []
    for _ in range(100):
        adamw_step(p, {"w": np.array(1.0)}, state, lr=0.01)
        trajectory.append(float(p["w"].data))
    want = reference_adamw([1.0] * 100, lr=0.01)
    assert np.max(np.abs(np.array(trajectory) - np.array(want))) < 1e-7


def test_decay_and_adaptive_step_are_decoupled():
    p = {"w": Tensor(np.zeros((), dtype=np.float64), requires_grad=True)}
    state = OptimizerState(weight_decay=0.05)
    traj = []
    for _ in range(50):
        adamw_step(p, {"w": np.array(0.3)}, state, lr=0.02)
        traj.append(float(p["w"].data))
    want = reference_adamw([0.3] * 50, lr=0.02, wd=0.05)
    assert np.max(np.abs(np.array(traj) - np.array(want))) < 1e-7


def test_non_finite_gradient_aborts_with_param_name():
    p = {"layer.w": Tensor(np.ones(2, dtype=np.float32), requires_grad=True)}
    state = OptimizerState()
    with pytest.raises(NonFiniteGradientError) as exc:
        adamw_step(p, {"layer.w": np.array([1.0, np.nan], dtype=np.float32)}, state, lr=0.1)
    assert "layer.w" in str(exc.value)
    assert np.array_equal(p["layer.w"].data, np.ones(2, dtype=np.float32))
    assert state.step_count == 0


def test_step_counter_strictly_increasing():
    p = {"w": Tensor(np.zeros(1, dtype=np.float32), requires_grad=True)}
    state = OptimizerState()
    for i in range(1, 4):
        adamw_step(p, {"w": np.ones(1, dtype=np.float32)}, state, lr=0.1)
        assert state.step_count == i


def test_clip_grad_norm_scales_to_bound():
    grads = {"a": np.full(4, 3.0), "b": np.full(9, 4.0)}
    norm = clip_grad_norm(grads, max_norm=1.0)
    assert norm == pytest.approx(math.sqrt(4 * 9 + 9 * 16))
    total = sum(float(np.square(g).sum()) for g in grads.values())
    assert math.sqrt(total) == pytest.approx(1.0, rel=1e-6)


def test_clip_grad_norm_noop_below_bound():
    grads = {"a": np.array([0.1, 0.2])}
    clip_grad_norm(grads, max_norm=10.0)
    assert np.allclose(grads["a"], [0.1, 0.2])


def test_cosine_schedule_endpoints_and_midpoint():
    assert cosine_lr(0, 100, 1e-4, 1e-6) == 1e-4
    assert cosine_lr(100, 100, 1e-4, 1e-6) == pytest.approx(1e-6, abs=1e-20)
    assert cosine_lr(50, 100, 1e-4, 1e-6) == pytest.approx((1e-4 + 1e-6) / 2)


def test_cosine_schedule_degenerate_total():
    assert cosine_lr(0, 0, 1e-4, 1e-6) == 1e-4


def test_cosine_schedule_rejects_out_of_range_step():
    with pytest.raises(ValueError):
        cosine_lr(11, 10, 1e-4, 1e-6)
    with pytest.raises(ValueError):
        cosine_lr(-1, 10, 1e-4, 1e-6)
