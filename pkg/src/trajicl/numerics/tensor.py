"""Dense-tensor reverse-mode autodiff on numpy arrays.

Tensors wrap row-major float arrays (float32 by default, float64 for
numerical oracles). Every differentiable op records its parents and a
backward closure; ``backward()`` on a scalar loss walks the graph once in
reverse topological order. Single-threaded and deterministic: identical
inputs produce bit-identical values and gradients.
"""

from __future__ import annotations

from contextlib import contextmanager
from typing import Callable, Iterator, Sequence

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested op."""


class DoubleBackwardError(RuntimeError):
    """backward() was called twice on the same graph without a reset."""


_grad_enabled = True


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording (evaluation / rollout forward passes)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled() -> bool:
    return _grad_enabled


class Tensor:
    """A numpy array plus optional gradient bookkeeping.

    ``data`` is never mutated by ops; parameter tensors are updated in
    place only by the optimizer between steps.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_done")

    def __init__(
        self,
        data,
        requires_grad: bool = False,
        _parents: tuple = (),
        _backward: Callable[[], None] | None = None,
    ):
        if isinstance(data, Tensor):
            data = data.data
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents = _parents
        self._backward = _backward
        self._done = False

    # -- introspection -------------------------------------------------

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    def _accumulate(self, g: np.ndarray) -> None:
        # First contribution keeps a reference (no copy); later ones rebind
        # out-of-place so a gradient array shared between two parents (the
        # residual-add case) is never mutated.
        if self.grad is None:
            self.grad = g if g.dtype == self.data.dtype else g.astype(self.data.dtype)
        else:
            self.grad = self.grad + g

    def zero_grad(self) -> None:
        self.grad = None

    # -- autograd driver -------------------------------------------------

    def backward(self) -> None:
        """Populate ``grad`` on every requires_grad leaf below this scalar.

        Visits each node exactly once. A second call on the same graph
        raises DoubleBackwardError; rebuild the graph (rerun forward) to
        differentiate again.
        """
        if self.data.ndim != 0:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.shape}")
        if self._done:
            raise DoubleBackwardError("backward() already ran on this graph; recompute the loss first")

        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))

        self.grad = np.ones((), dtype=self.data.dtype)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward()
            node._done = True
        # Release closures so intermediate buffers can be collected.
        for node in order:
            if node is not self and node._parents:
                node._parents = ()
                node._backward = None

    # -- operator sugar --------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            return add(self, -other)
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __matmul__(self, other):
        return matmul(self, other)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, axes: Sequence[int]):
        return transpose(self, axes)

    def sum(self, axis=None):
        return tensor_sum(self, axis)

    def mean(self, axis=None):
        return tensor_mean(self, axis)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data: np.ndarray, parents: tuple, backward: Callable[[], None] | None) -> Tensor:
    requires = _grad_enabled and any(p.requires_grad for p in parents)
    if not requires:
        return Tensor(data)
    out = Tensor(data, requires_grad=True, _parents=parents, _backward=backward)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, dim in enumerate(shape):
        if dim == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


# -- elementwise ops -------------------------------------------------------


def add(a, b) -> Tensor:
    if isinstance(b, (int, float)):  # python scalars must not promote float32
        a = as_tensor(a)
        out = _result(a.data + b, (a,), None)
        if out.requires_grad:
            def _bw_s():
                a._accumulate(out.grad)
            out._backward = _bw_s
        return out
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data + b.data
    out = _result(out_data, (a, b), None)
    if out.requires_grad:
        def _bw():
            g = out.grad
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.shape))
        out._backward = _bw
    return out


def mul(a, b) -> Tensor:
    if isinstance(b, (int, float)):
        a = as_tensor(a)
        out = _result(a.data * b, (a,), None)
        if out.requires_grad:
            def _bw_s():
                a._accumulate(out.grad * b)
            out._backward = _bw_s
        return out
    a, b = as_tensor(a), as_tensor(b)
    out_data = a.data * b.data
    out = _result(out_data, (a, b), None)
    if out.requires_grad:
        def _bw():
            g = out.grad
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.shape))
        out._backward = _bw
    return out


def matmul(a, b) -> Tensor:
    """Matrix product of two tensors, 2-D or batched with equal batch dims."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-D operands, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    if a.ndim != b.ndim or a.shape[:-2] != b.shape[:-2]:
        if not (a.ndim == 2 and b.ndim == 2):
            raise ShapeError(f"matmul batch dimensions disagree: {a.shape} x {b.shape}")
    out_data = a.data @ b.data
    out = _result(out_data, (a, b), None)
    if out.requires_grad:
        def _bw():
            g = out.grad
            if a.requires_grad:
                a._accumulate(g @ np.swapaxes(b.data, -1, -2))
            if b.requires_grad:
                b._accumulate(np.swapaxes(a.data, -1, -2) @ g)
        out._backward = _bw
    return out


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out = _result(a.data.reshape(shape), (a,), None)
    if out.requires_grad:
        def _bw():
            a._accumulate(out.grad.reshape(a.shape))
        out._backward = _bw
    return out


def transpose(a, axes: Sequence[int]) -> Tensor:
    a = as_tensor(a)
    axes = tuple(axes)
    out = _result(np.transpose(a.data, axes), (a,), None)
    if out.requires_grad:
        inv = tuple(np.argsort(axes))
        def _bw():
            a._accumulate(np.transpose(out.grad, inv))
        out._backward = _bw
    return out


def tensor_sum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    out = _result(a.data.sum(axis=axis), (a,), None)
    if out.requires_grad:
        def _bw():
            g = out.grad
            if axis is not None:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.shape))
        out._backward = _bw
    return out


def tensor_mean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    n = a.size if axis is None else a.shape[axis]
    return mul(tensor_sum(a, axis), 1.0 / n)


def embedding(table, ids: np.ndarray) -> Tensor:
    """Row lookup ``table[ids]`` with scatter-add gradient into the table."""
    table = as_tensor(table)
    ids = np.asarray(ids)
    out = _result(table.data[ids], (table,), None)
    if out.requires_grad:
        def _bw():
            g = out.grad.reshape(-1, table.shape[-1])
            np.add.at(_ensure_grad(table), ids.ravel(), g)
        out._backward = _bw
    return out


def _ensure_grad(t: Tensor) -> np.ndarray:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    return t.grad


def take_rows(a, idx: np.ndarray) -> Tensor:
    """Select rows of a 2-D tensor; backward scatter-adds into place."""
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError(f"take_rows expects a 2-D tensor, got {a.shape}")
    idx = np.asarray(idx)
    out = _result(a.data[idx], (a,), None)
    if out.requires_grad:
        def _bw():
            np.add.at(_ensure_grad(a), idx, out.grad)
        out._backward = _bw
    return out


def scatter_rows(values, idx: np.ndarray, num_rows: int) -> Tensor:
    """Place rows of ``values`` at ``idx`` in a zero (num_rows, D) tensor."""
    values = as_tensor(values)
    d = values.shape[-1]
    data = np.zeros((num_rows, d), dtype=values.data.dtype)
    data[idx] = values.data
    out = _result(data, (values,), None)
    if out.requires_grad:
        def _bw():
            values._accumulate(out.grad[idx])
        out._backward = _bw
    return out


def assert_all_finite(t: Tensor, what: str = "tensor") -> Tensor:
    if not np.isfinite(t.data).all():
        raise FloatingPointError(f"non-finite values in {what}")
    return t
