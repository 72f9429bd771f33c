"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps a float64 ndarray and records the op graph as closures;
`backward()` walks the graph in reverse topological order accumulating
gradients. The op set is exactly what the networks here need.
"""

from __future__ import annotations

import numpy as np


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to `shape`."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    # Make `ndarray <op> Tensor` defer to the reflected operators below instead
    # of numpy consuming the Tensor element-wise, which would drop the tape.
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple = ()
        self._backward_fn = None

    @classmethod
    def _op(cls, data, parents, backward_fn) -> "Tensor":
        out = cls(data)
        parents = tuple(p for p in parents if isinstance(p, Tensor))
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward_fn = backward_fn
        return out

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- graph traversal -------------------------------------------------------

    def backward(self, grad=None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        else:
            grad = np.asarray(grad, dtype=np.float64)
            if grad.shape != self.data.shape:
                raise ValueError(f"gradient shape {grad.shape} != value shape {self.data.shape}")
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:  # iterative DFS; graphs can outgrow the recursion limit
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = grad if self.grad is None else self.grad + grad
        for node in reversed(order):
            if node._backward_fn is not None and node.grad is not None:
                node._backward_fn(node.grad)

    def _accum(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = grad.copy()
        else:
            self.grad = self.grad + grad

    # -- arithmetic ------------------------------------------------------------

    @staticmethod
    def _data(other):
        return other.data if isinstance(other, Tensor) else np.asarray(other, dtype=np.float64)

    def __add__(self, other):
        od = self._data(other)

        def bwd(g, a=self, b=other, sa=self.data.shape, sb=od.shape):
            if a.requires_grad:
                a._accum(_unbroadcast(g, sa).reshape(sa))
            if isinstance(b, Tensor) and b.requires_grad:
                b._accum(_unbroadcast(g, sb).reshape(sb))

        return Tensor._op(self.data + od, (self, other), bwd)

    __radd__ = __add__

    def __neg__(self):
        def bwd(g, a=self):
            if a.requires_grad:
                a._accum(-g)

        return Tensor._op(-self.data, (self,), bwd)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Tensor) else -self._data(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        od = self._data(other)

        def bwd(g, a=self, b=other, bd=od):
            if a.requires_grad:
                a._accum(_unbroadcast(g * bd, a.data.shape).reshape(a.data.shape))
            if isinstance(b, Tensor) and b.requires_grad:
                b._accum(_unbroadcast(g * a.data, b.data.shape).reshape(b.data.shape))

        return Tensor._op(self.data * od, (self, other), bwd)

    __rmul__ = __mul__

    def __truediv__(self, other):
        od = self._data(other)

        def bwd(g, a=self, b=other, bd=od):
            if a.requires_grad:
                a._accum(_unbroadcast(g / bd, a.data.shape).reshape(a.data.shape))
            if isinstance(b, Tensor) and b.requires_grad:
                gb = -g * a.data / (bd * bd)
                b._accum(_unbroadcast(gb, b.data.shape).reshape(b.data.shape))

        return Tensor._op(self.data / od, (self, other), bwd)

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("only scalar exponents are supported")

        def bwd(g, a=self, p=float(p)):
            if a.requires_grad:
                a._accum(g * p * a.data ** (p - 1.0))

        return Tensor._op(self.data**p, (self,), bwd)

    def __matmul__(self, other):
        if not isinstance(other, Tensor):
            other = Tensor(other)
        if self.data.ndim != 2 or other.data.ndim != 2:
            raise ValueError(
                f"matmul expects 2-D operands, got {self.data.shape} @ {other.data.shape}"
            )
        if self.data.shape[1] != other.data.shape[0]:
            raise ValueError(f"matmul shape mismatch: {self.data.shape} @ {other.data.shape}")

        def bwd(g, a=self, b=other):
            if a.requires_grad:
                a._accum(g @ b.data.T)
            if b.requires_grad:
                b._accum(a.data.T @ g)

        return Tensor._op(self.data @ other.data, (self, other), bwd)

    # -- nonlinearities ----------------------------------------------------------

    def tanh(self):
        y = np.tanh(self.data)

        def bwd(g, a=self, y=y):
            if a.requires_grad:
                a._accum(g * (1.0 - y * y))

        return Tensor._op(y, (self,), bwd)

    def relu(self):
        y = np.maximum(self.data, 0.0)

        def bwd(g, a=self):
            if a.requires_grad:
                a._accum(g * (a.data > 0.0))

        return Tensor._op(y, (self,), bwd)

    def exp(self):
        y = np.exp(self.data)

        def bwd(g, a=self, y=y):
            if a.requires_grad:
                a._accum(g * y)

        return Tensor._op(y, (self,), bwd)

    def log(self):
        def bwd(g, a=self):
            if a.requires_grad:
                a._accum(g / a.data)

        return Tensor._op(np.log(self.data), (self,), bwd)

    def softplus(self):
        y = np.logaddexp(0.0, self.data)

        def bwd(g, a=self):
            if a.requires_grad:
                # sigmoid via tanh keeps large |x| stable
                a._accum(g * 0.5 * (1.0 + np.tanh(0.5 * a.data)))

        return Tensor._op(y, (self,), bwd)

    def clamp(self, lo: float, hi: float):
        y = np.clip(self.data, lo, hi)

        def bwd(g, a=self, lo=lo, hi=hi):
            if a.requires_grad:
                a._accum(g * ((a.data >= lo) & (a.data <= hi)))

        return Tensor._op(y, (self,), bwd)

    # -- reductions / shape ------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        y = self.data.sum(axis=axis, keepdims=keepdims)

        def bwd(g, a=self, axis=axis, keepdims=keepdims):
            if not a.requires_grad:
                return
            if axis is None:
                a._accum(np.broadcast_to(g, a.data.shape).copy())
            else:
                if not keepdims:
                    g = np.expand_dims(g, axis)
                a._accum(np.broadcast_to(g, a.data.shape).copy())

        return Tensor._op(y, (self,), bwd)

    def mean(self, axis=None, keepdims: bool = False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def __getitem__(self, key):
        y = self.data[key]

        def bwd(g, a=self, key=key):
            if a.requires_grad:
                full = np.zeros_like(a.data)
                full[key] = g
                a._accum(full)

        return Tensor._op(y, (self,), bwd)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise minimum; gradient follows the winner (ties go to `a`)."""
    take_a = a.data <= b.data

    def bwd(g, a=a, b=b, take_a=take_a):
        if a.requires_grad:
            a._accum(g * take_a)
        if b.requires_grad:
            b._accum(g * ~take_a)

    return Tensor._op(np.where(take_a, a.data, b.data), (a, b), bwd)


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = list(tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bwd(g, tensors=tensors, offsets=offsets, axis=axis):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accum(g[tuple(idx)])

    return Tensor._op(data, tuple(tensors), bwd)
