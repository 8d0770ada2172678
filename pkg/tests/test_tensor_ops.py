import numpy as np
import pytest

from trajicl.numerics import (
    DoubleBackwardError,
    ShapeError,
    Tensor,
    matmul,
    no_grad,
)


def naive_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Triple-loop reference product."""
    m, k = a.shape
    k2, n = b.shape
    assert k == k2
    out = np.zeros((m, n), dtype=np.float64)
    for i in range(m):
        for j in range(n):
            for l in range(k):
                out[i, j] += float(a[i, l]) * float(b[l, j])
    return out


def test_matmul_identity():
    rng = np.random.default_rng(0)
    b = rng.normal(size=(3, 3)).astype(np.float32)
    out = matmul(Tensor(np.eye(3, dtype=np.float32)), Tensor(b))
    assert np.array_equal(out.data, b)


def test_matmul_hand_computed():
    a = Tensor(np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32))
    b = Tensor(np.array([[0.0], [1.0]], dtype=np.float32))
    out = matmul(a, b)
    assert np.array_equal(out.data, np.array([[2.0], [4.0]], dtype=np.float32))


def test_matmul_against_triple_loop_oracle():
    rng = np.random.default_rng(7)
    a = rng.normal(size=(5, 7)).astype(np.float32)
    b = rng.normal(size=(7, 3)).astype(np.float32)
    got = matmul(Tensor(a), Tensor(b)).data
    want = naive_matmul(a, b)
    assert np.max(np.abs(got - want)) < 1e-6


def test_matmul_shape_mismatch_names_both_shapes():
    a = Tensor(np.zeros((2, 3), dtype=np.float32))
    b = Tensor(np.zeros((4, 5), dtype=np.float32))
    with pytest.raises(ShapeError) as exc:
        matmul(a, b)
    assert "(2, 3)" in str(exc.value) and "(4, 5)" in str(exc.value)


def test_matmul_batched_matches_per_slice():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(2, 3, 4, 5)).astype(np.float32)
    b = rng.normal(size=(2, 3, 5, 6)).astype(np.float32)
    got = matmul(Tensor(a), Tensor(b)).data
    for i in range(2):
        for j in range(3):
            assert np.allclose(got[i, j], a[i, j] @ b[i, j], atol=1e-6)


def test_sum_gradient_is_all_ones():
    x = Tensor(np.arange(12, dtype=np.float32).reshape(3, 4), requires_grad=True)
    loss = x.sum()
    loss.backward()
    assert np.array_equal(x.grad, np.ones((3, 4), dtype=np.float32))


def test_square_gradient_analytic():
    x = Tensor(np.array(3.0, dtype=np.float32), requires_grad=True)
    loss = x * x
    loss.backward()
    assert np.isclose(x.grad, 6.0)


def test_double_backward_raises():
    x = Tensor(np.array(2.0, dtype=np.float32), requires_grad=True)
    loss = x * x
    loss.backward()
    with pytest.raises(DoubleBackwardError):
        loss.backward()


def test_backward_requires_scalar():
    x = Tensor(np.ones(3, dtype=np.float32), requires_grad=True)
    with pytest.raises(ShapeError):
        (x * x).backward()


def test_shared_node_gradient_accumulates_once_per_path():
    # loss = sum(x * x) + sum(x): grad = 2x + 1.
    x = Tensor(np.array([1.0, -2.0, 0.5], dtype=np.float32), requires_grad=True)
    loss = (x * x).sum() + x.sum()
    loss.backward()
    assert np.allclose(x.grad, 2 * x.data + 1.0)


def test_no_grad_suppresses_graph():
    x = Tensor(np.ones(4, dtype=np.float32), requires_grad=True)
    with no_grad():
        y = (x * x).sum()
    assert not y.requires_grad
    assert y._parents == ()


def test_broadcast_add_gradient_shapes():
    x = Tensor(np.ones((2, 5), dtype=np.float32), requires_grad=True)
    b = Tensor(np.zeros(5, dtype=np.float32), requires_grad=True)
    loss = (x + b).sum()
    loss.backward()
    assert x.grad.shape == (2, 5)
    assert b.grad.shape == (5,)
    assert np.allclose(b.grad, 2.0)


def test_dtype_preserved_for_float64():
    x = Tensor(np.ones((2, 2), dtype=np.float64), requires_grad=True)
    y = matmul(x, x).sum()
    assert y.data.dtype == np.float64
    y.backward()
    assert x.grad.dtype == np.float64


def test_determinism_same_inputs_bit_identical():
    rng = np.random.default_rng(11)
    a = rng.normal(size=(8, 8)).astype(np.float32)

    def run():
        x = Tensor(a.copy(), requires_grad=True)
        loss = (matmul(x, x) * 0.5).sum()
        loss.backward()
        return loss.data.copy(), x.grad.copy()

    l1, g1 = run()
    l2, g2 = run()
    assert np.array_equal(l1, l2)
    assert np.array_equal(g1, g2)
