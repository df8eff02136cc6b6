"""Minimal reverse-mode differentiation over numpy arrays.

Only the handful of operations the recommender needs are provided. Every op
returns a new :class:`Tensor` that remembers its parents and a closure which
pushes the upstream gradient back to them. ``Tensor.backward`` walks the graph
in reverse topological order.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a seed gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
        stack = [(self, False)]
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)


def parameter(array):
    return Tensor(array, requires_grad=True)


def constant(array):
    return Tensor(array)


def _wrap(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g, shape):
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _make(data, parents, backward):
    req = any(p.requires_grad for p in parents)
    return Tensor(data, req, parents if req else (), backward if req else None)


def add(a, b):
    a, b = _wrap(a), _wrap(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), backward)


def mul(a, b):
    a, b = _wrap(a), _wrap(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), backward)


def linear(x, w):
    """``x @ w.T`` along the last axis; ``w`` has shape (out, in)."""
    x, w = _wrap(x), _wrap(w)

    def backward(g):
        if x.requires_grad:
            x._accumulate(g @ w.data)
        if w.requires_grad:
            w._accumulate(g.reshape(-1, g.shape[-1]).T @ x.data.reshape(-1, x.shape[-1]))

    return _make(x.data @ w.data.T, (x, w), backward)


def spmm(adj, x):
    """Product of a constant scipy sparse matrix with a 2-D tensor."""
    x = _wrap(x)
    adj = sp.csr_matrix(adj)

    def backward(g):
        x._accumulate(adj.T @ g)

    return _make(np.asarray(adj @ x.data), (x,), backward)


def take(x, index):
    """Gather rows of ``x`` with an integer index array of any shape."""
    x = _wrap(x)
    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        if x.grad is None:
            x.grad = np.zeros_like(x.data)
        np.add.at(x.grad, index, g)

    return _make(x.data[index], (x,), backward)


def leaky_relu(x, slope):
    x = _wrap(x)
    scale = np.where(x.data > 0, 1.0, slope)

    def backward(g):
        x._accumulate(g * scale)

    return _make(x.data * scale, (x,), backward)


def sum(x, axis=None, keepdims=False):  # noqa: A001
    x = _wrap(x)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.shape))

    return _make(x.data.sum(axis=axis, keepdims=keepdims), (x,), backward)


def concat(xs, axis=-1):
    xs = [_wrap(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    bounds = np.cumsum(sizes)[:-1]

    def backward(g):
        for x, piece in zip(xs, np.split(g, bounds, axis=axis)):
            if x.requires_grad:
                x._accumulate(piece)

    return _make(np.concatenate([x.data for x in xs], axis=axis), tuple(xs), backward)


def reshape(x, shape):
    x = _wrap(x)

    def backward(g):
        x._accumulate(g.reshape(x.shape))

    return _make(x.data.reshape(shape), (x,), backward)


def softmax(x, axis=-1):
    x = _wrap(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        x._accumulate(out * (g - (g * out).sum(axis=axis, keepdims=True)))

    return _make(out, (x,), backward)


def sigmoid_array(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def bce_from_logits(logits, labels, eps=1e-7):
    """Summed binary cross-entropy of sigmoid(logits) clamped to [eps, 1-eps]."""
    logits = _wrap(logits)
    y = np.asarray(labels, dtype=np.float64)
    p = sigmoid_array(logits.data)
    pc = np.clip(p, eps, 1.0 - eps)
    loss = -(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc)).sum()
    inside = (p > eps) & (p < 1.0 - eps)

    def backward(g):
        # dL/dp * dp/dz collapses to p - y where the clamp is inactive
        logits._accumulate(g * np.where(inside, p - y, 0.0))

    return _make(np.float64(loss), (logits,), backward)
