"""A small reverse-mode autodiff engine over numpy arrays.

Only the operations the networks and losses need are provided.  A node
records its parents and a closure that pushes its gradient to them;
``backward`` walks the graph in reverse topological order.  Nodes whose
parents need no gradient are created without a closure, so inference on
constant inputs builds no graph.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, _parents=(), _backward=None):
        self.data = np.asarray(data, dtype=float)
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(self.data) if (requires_grad and _backward is None) else None
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        if self.requires_grad:
            self.grad = np.zeros_like(self.data)

    @staticmethod
    def _make(data, parents, backward):
        parents = tuple(p for p in parents if isinstance(p, Tensor))
        if any(p.requires_grad for p in parents):
            return Tensor(data, True, parents, backward)
        return Tensor(data)

    # -- elementwise -------------------------------------------------------
    def __add__(self, other):
        o = as_tensor(other)
        out = None

        def bw():
            if self.requires_grad:
                self.grad = self.grad + _unbroadcast(out.grad, self.shape)
            if o.requires_grad:
                o.grad = o.grad + _unbroadcast(out.grad, o.shape)
        out = Tensor._make(self.data + o.data, (self, o), bw)
        return out

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        o = as_tensor(other)
        out = None

        def bw():
            if self.requires_grad:
                self.grad = self.grad + _unbroadcast(out.grad * o.data, self.shape)
            if o.requires_grad:
                o.grad = o.grad + _unbroadcast(out.grad * self.data, o.shape)
        out = Tensor._make(self.data * o.data, (self, o), bw)
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("division by a Tensor is not supported")
        return self * (1.0 / np.asarray(other, dtype=float))

    def __matmul__(self, other):
        o = as_tensor(other)
        out = None

        def bw():
            if self.requires_grad:
                self.grad = self.grad + out.grad @ o.data.T
            if o.requires_grad:
                o.grad = o.grad + self.data.T @ out.grad
        out = Tensor._make(self.data @ o.data, (self, o), bw)
        return out

    def relu(self):
        mask = self.data > 0
        out = None

        def bw():
            self.grad = self.grad + out.grad * mask
        out = Tensor._make(self.data * mask, (self,), bw)
        return out

    def square(self):
        return self * self

    def exp(self):
        e = np.exp(self.data)
        out = None

        def bw():
            self.grad = self.grad + out.grad * e
        out = Tensor._make(e, (self,), bw)
        return out

    def softmax(self, axis: int = -1):
        z = self.data - self.data.max(axis=axis, keepdims=True)
        e = np.exp(z)
        s = e / e.sum(axis=axis, keepdims=True)
        out = None

        def bw():
            g = out.grad
            self.grad = self.grad + s * (g - (g * s).sum(axis=axis, keepdims=True))
        out = Tensor._make(s, (self,), bw)
        return out

    # -- reductions and indexing -------------------------------------------
    def sum(self, axis=None):
        out = None

        def bw():
            g = out.grad
            if axis is not None:
                g = np.expand_dims(g, axis)
            self.grad = self.grad + np.broadcast_to(g, self.shape)
        out = Tensor._make(self.data.sum(axis=axis), (self,), bw)
        return out

    def mean(self, axis=None):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis) * (1.0 / n)

    def __getitem__(self, idx):
        out = None

        def bw():
            g = np.zeros_like(self.data)
            np.add.at(g, idx, out.grad)
            self.grad = self.grad + g
        out = Tensor._make(self.data[idx], (self,), bw)
        return out

    def reshape(self, *shape):
        out = None

        def bw():
            self.grad = self.grad + out.grad.reshape(self.shape)
        out = Tensor._make(self.data.reshape(*shape), (self,), bw)
        return out

    # -- driver ------------------------------------------------------------
    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() needs a scalar output")
        order, seen = [], set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        for node in order:
            if node._backward is not None:
                node.grad = np.zeros_like(node.data)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def concat(tensors, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in ts]
    cuts = np.cumsum(sizes)[:-1]
    out = None

    def bw():
        for t, g in zip(ts, np.split(out.grad, cuts, axis=axis)):
            if t.requires_grad:
                t.grad = t.grad + g
    out = Tensor._make(np.concatenate([t.data for t in ts], axis=axis), ts, bw)
    return out
