"""Neural building blocks: layer norm, GELU, dropout, causal attention,
masked cross-entropy, and weight initialization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import ShapeError, Tensor, _result, _unbroadcast, as_tensor


class ConfigurationError(ValueError):
    """Invalid layer/model hyperparameters."""


class EmptyLossError(ValueError):
    """Loss requested over an all-false mask (malformed batch)."""


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis to mean 0 / variance 1, then rescale."""
    if eps <= 0:
        raise ConfigurationError(f"layer_norm eps must be > 0, got {eps}")
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layer_norm affine shapes {gain.shape}/{bias.shape} do not match feature dim {d}")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = _result(xhat * gain.data + bias.data, (x, gain, bias), None)
    if out.requires_grad:
        def _bw():
            g = out.grad
            if gain.requires_grad:
                gain._accumulate((g * xhat).reshape(-1, d).sum(axis=0))
            if bias.requires_grad:
                bias._accumulate(g.reshape(-1, d).sum(axis=0))
            if x.requires_grad:
                gy = g * gain.data
                m1 = gy.mean(axis=-1, keepdims=True)
                m2 = (gy * xhat).mean(axis=-1, keepdims=True)
                x._accumulate(inv * (gy - m1 - xhat * m2))
        out._backward = _bw
    return out


_GELU_C = float(np.sqrt(2.0 / np.pi))


def gelu(x) -> Tensor:
    """tanh-approximation GELU."""
    x = as_tensor(x)
    xd = x.data
    x2 = xd * xd
    t = np.tanh(_GELU_C * (xd + 0.044715 * (x2 * xd)))
    out = _result(0.5 * xd * (1.0 + t), (x,), None)
    if out.requires_grad:
        def _bw():
            du = _GELU_C * (1.0 + 0.134145 * x2)
            local = 0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * du
            x._accumulate(out.grad * local)
        out._backward = _bw
    return out


def softmax(x, axis: int = -1) -> Tensor:
    """Numerically stable softmax; rows along ``axis`` sum to 1."""
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=axis, keepdims=True)
    out = _result(p, (x,), None)
    if out.requires_grad:
        def _bw():
            g = out.grad
            dot = (g * p).sum(axis=axis, keepdims=True)
            x._accumulate(p * (g - dot))
        out._backward = _bw
    return out


def dropout(x, p: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout; identity when not training or p == 0."""
    x = as_tensor(x)
    if not training or p == 0.0:
        return x
    if not 0.0 <= p < 1.0:
        raise ConfigurationError(f"dropout rate must be in [0, 1), got {p}")
    keep = (rng.random(x.shape) >= p).astype(x.data.dtype) / (1.0 - p)
    out = _result(x.data * keep, (x,), None)
    if out.requires_grad:
        def _bw():
            x._accumulate(out.grad * keep)
        out._backward = _bw
    return out


def linear(x, w, b=None) -> Tensor:
    """x @ w (+ b) with x flattened over leading axes."""
    x, w = as_tensor(x), as_tensor(w)
    lead = x.shape[:-1]
    h = x.reshape((-1, x.shape[-1])) if x.ndim != 2 else x
    y = h @ w
    if b is not None:
        y = y + as_tensor(b)
    if len(lead) != 1:
        y = y.reshape(lead + (w.shape[-1],))
    return y


@dataclass
class AttentionWeights:
    """Projection weights for one multi-head causal self-attention layer."""

    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    bq: Tensor
    bk: Tensor
    bv: Tensor
    bo: Tensor


_mask_cache: dict[tuple[int, str], np.ndarray] = {}


def causal_attention_mask(t: int, dtype=np.float32) -> np.ndarray:
    """(t, t) additive mask: 0 on/below the diagonal, -inf above."""
    key = (t, np.dtype(dtype).name)
    cached = _mask_cache.get(key)
    if cached is None:
        m = np.zeros((t, t), dtype=dtype)
        m[np.triu_indices(t, k=1)] = -np.inf
        m.setflags(write=False)
        if len(_mask_cache) > 64:
            _mask_cache.clear()
        cached = _mask_cache[key] = m
    return cached


def causal_self_attention(
    x,
    weights: AttentionWeights,
    num_heads: int,
    return_probs: bool = False,
):
    """Multi-head self-attention with a strict causal mask.

    x: (B, T, d). Output at position t depends only on positions <= t.
    """
    x = as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"attention input must be (B, T, d), got {x.shape}")
    b, t, d = x.shape
    if d % num_heads != 0:
        raise ConfigurationError(f"d_model={d} not divisible by num_heads={num_heads}")
    dh = d // num_heads

    def heads(z):
        return z.reshape((b, t, num_heads, dh)).transpose((0, 2, 1, 3))

    q = heads(linear(x, weights.wq, weights.bq))
    k = heads(linear(x, weights.wk, weights.bk))
    v = heads(linear(x, weights.wv, weights.bv))

    scores = q @ k.transpose((0, 1, 3, 2))
    scores = scores * (1.0 / np.sqrt(dh))
    scores = scores + causal_attention_mask(t, dtype=x.data.dtype)
    probs = softmax(scores, axis=-1)

    ctx = (probs @ v).transpose((0, 2, 1, 3)).reshape((b, t, d))
    out = linear(ctx, weights.wo, weights.bo)
    if return_probs:
        return out, probs
    return out


def cross_entropy_masked(logits, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean negative log-softmax probability of targets over masked rows.

    logits: (N, V); targets: int (N,); mask: bool (N,). Raises
    EmptyLossError when no mask bit is set.
    """
    logits = as_tensor(logits)
    if logits.ndim != 2:
        raise ShapeError(f"cross_entropy_masked expects (N, V) logits, got {logits.shape}")
    n, v = logits.shape
    targets = np.asarray(targets)
    mask = np.asarray(mask, dtype=bool)
    if targets.shape != (n,) or mask.shape != (n,):
        raise ShapeError(f"targets/mask shapes {targets.shape}/{mask.shape} do not match logits rows {n}")
    if targets.min(initial=0) < 0 or targets.max(initial=0) >= v:
        raise ValueError(f"targets must lie in [0, {v})")
    m = int(mask.sum())
    if m == 0:
        raise EmptyLossError("loss mask is all false: no action positions to train on")

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1))
    nll = logsumexp - z[np.arange(n), targets]
    loss_val = np.asarray((nll * mask).sum() / m, dtype=logits.data.dtype)
    out = _result(loss_val, (logits,), None)
    if out.requires_grad:
        def _bw():
            p = np.exp(z - logsumexp[:, None])
            p[np.arange(n), targets] -= 1.0
            p *= (mask[:, None] * (out.grad / m)).astype(p.dtype)
            logits._accumulate(p)
        out._backward = _bw
    return out


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02, dtype=np.float32) -> np.ndarray:
    """Normal(0, std) resampled to lie within 2 std (GPT-style init)."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return out.astype(dtype)
