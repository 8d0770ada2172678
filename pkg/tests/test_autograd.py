"""Finite-difference gradient checks (central differences, float64) for
every differentiable block."""

import numpy as np
import pytest

from trajicl.numerics import (
    Tensor,
    causal_self_attention,
    cross_entropy_masked,
    embedding,
    gelu,
    layer_norm,
    linear,
    scatter_rows,
    softmax,
    take_rows,
)
from tests.test_nn_blocks import make_attention_weights


def fd_check(build_loss, params, rng, n_samples=20, h=1e-3, tol=1e-4, richardson=False):
    """Compare analytic grads against central finite differences.

    ``build_loss`` must rebuild the graph from the (float64) ``params`` on
    every call. Relative error uses a 1e-2 magnitude floor so near-zero
    entries are held to 1e-6 absolute agreement (the fd truncation error at
    h=1e-3 makes a pure ratio ill-posed there). ``richardson`` combines the
    h and h/2 central differences to cancel the O(h^2) truncation term;
    needed for the deep end-to-end loss, whose curvature at h=1e-3 exceeds
    the 1e-4 bar for a plain central difference.
    """
    loss = build_loss()
    loss.backward()
    grads = [p.grad.copy() for p in params]

    def central(p, idx, step):
        orig = p.data[idx]
        p.data[idx] = orig + step
        up = build_loss().item()
        p.data[idx] = orig - step
        down = build_loss().item()
        p.data[idx] = orig
        return (up - down) / (2 * step)

    for _ in range(n_samples):
        pi = int(rng.integers(len(params)))
        p = params[pi]
        flat_idx = int(rng.integers(p.size))
        idx = np.unravel_index(flat_idx, p.shape)
        fd = central(p, idx, h)
        if richardson:
            fd = (4 * central(p, idx, h / 2) - fd) / 3
        an = grads[pi][idx]
        rel = abs(fd - an) / max(abs(fd), abs(an), 1e-2)
        assert rel < tol, f"param {pi} idx {idx}: fd={fd:.8g} analytic={an:.8g} rel={rel:.3g}"


def p64(rng, *shape):
    return Tensor(rng.normal(0, 0.5, size=shape), requires_grad=True)


def test_grad_linear():
    rng = np.random.default_rng(0)
    x, w, b = p64(rng, 6, 5), p64(rng, 5, 4), p64(rng, 4)
    fd_check(lambda: (linear(x, w, b) * linear(x, w, b)).sum(), [x, w, b], rng)


def test_grad_layer_norm():
    rng = np.random.default_rng(1)
    x, g, b = p64(rng, 3, 8), p64(rng, 8), p64(rng, 8)
    fd_check(lambda: (layer_norm(x, g, b, 1e-5) * layer_norm(x, g, b, 1e-5)).sum(), [x, g, b], rng)


def test_grad_gelu():
    rng = np.random.default_rng(2)
    x = p64(rng, 5, 7)
    fd_check(lambda: (gelu(x) * gelu(x)).sum(), [x], rng)


def test_grad_softmax():
    rng = np.random.default_rng(3)
    x = p64(rng, 4, 9)
    c = np.arange(36, dtype=np.float64).reshape(4, 9)
    fd_check(lambda: (softmax(x) * c).sum(), [x], rng)


def test_grad_attention():
    rng = np.random.default_rng(4)
    d = 8
    w = make_attention_weights(d, rng, dtype=np.float64)
    x = p64(rng, 2, 5, d)
    params = [x, w.wq, w.wk, w.wv, w.wo, w.bq, w.bk, w.bv, w.bo]
    c = np.sin(np.arange(2 * 5 * d, dtype=np.float64)).reshape(2, 5, d)
    fd_check(lambda: (causal_self_attention(x, w, num_heads=2) * c).sum(), params, rng, n_samples=30)


def test_grad_cross_entropy():
    rng = np.random.default_rng(5)
    logits = p64(rng, 10, 8)
    targets = rng.integers(0, 8, size=10)
    mask = np.ones(10, dtype=bool)
    mask[::3] = False
    fd_check(lambda: cross_entropy_masked(logits, targets, mask), [logits], rng)


def test_grad_embedding():
    rng = np.random.default_rng(6)
    table = p64(rng, 12, 4)
    ids = rng.integers(0, 12, size=(3, 5))
    c = rng.normal(size=(3, 5, 4))
    fd_check(lambda: (embedding(table, ids) * c).sum(), [table], rng)


def test_grad_take_and_scatter_rows():
    rng = np.random.default_rng(7)
    x = p64(rng, 9, 4)
    idx = np.array([0, 3, 3, 8])
    c = rng.normal(size=(4, 4))
    fd_check(lambda: (take_rows(x, idx) * c).sum(), [x], rng)
    vals = p64(rng, 3, 5)
    c2 = rng.normal(size=(7, 5))
    fd_check(lambda: (scatter_rows(vals, np.array([1, 4, 6]), 7) * c2).sum(), [vals], rng)


def test_grad_mlp_composition():
    rng = np.random.default_rng(8)
    x = p64(rng, 4, 6)
    w1, b1 = p64(rng, 6, 12), p64(rng, 12)
    w2, b2 = p64(rng, 12, 3), p64(rng, 3)

    def loss():
        h = gelu(linear(x, w1, b1))
        y = linear(h, w2, b2)
        return (y * y).sum()

    fd_check(loss, [x, w1, b1, w2, b2], rng, n_samples=30)


def test_gradients_deterministic():
    rng = np.random.default_rng(9)
    base = rng.normal(size=(6, 6))

    def run():
        x = Tensor(base.copy(), requires_grad=True)
        loss = (gelu(x) * gelu(x)).sum()
        loss.backward()
        return x.grad.copy()

    assert np.array_equal(run(), run())
