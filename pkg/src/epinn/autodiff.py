"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

A :class:`Var` wraps an array and records how it was produced; calling
``backward()`` on a scalar result sweeps the tape once and accumulates
``.grad`` on every participating node. The op set is deliberately small:
exactly what evidential likelihoods, PDE residual terms, and priors need.

The module-level helpers (``exp``, ``log``, ``tanh``, ...) dispatch on type,
so the same arithmetic code can run on plain arrays (fast, untracked) or on
``Var`` nodes (tracked) without duplication.
"""

from __future__ import annotations

import numpy as np
from scipy import special as _special


def _unbroadcast(grad, shape):
    """Sum an upstream gradient down to `shape` (undo numpy broadcasting)."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Var:
    """One tape node: a float64 array plus the rule for its local gradient."""

    __slots__ = ("data", "grad", "_parents", "_bw")

    # Keep numpy ufuncs from consuming Var operands in mixed expressions;
    # this forces `ndarray <op> Var` to fall back to the reflected methods.
    __array_ufunc__ = None

    def __init__(self, data, parents=(), bw=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._bw = bw

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def item(self):
        return float(self.data)

    def __repr__(self):
        return f"Var({self.data!r})"

    def _acc(self, g):
        self.grad = g if self.grad is None else self.grad + g

    # ---- arithmetic -----------------------------------------------------

    def __add__(self, other):
        a, b = self, as_var(other)
        out = Var(a.data + b.data, (a, b))

        def bw(g):
            a._acc(_unbroadcast(g, a.data.shape))
            b._acc(_unbroadcast(g, b.data.shape))

        out._bw = bw
        return out

    __radd__ = __add__

    def __neg__(self):
        a = self
        out = Var(-a.data, (a,))
        out._bw = lambda g: a._acc(-g)
        return out

    def __sub__(self, other):
        a, b = self, as_var(other)
        out = Var(a.data - b.data, (a, b))

        def bw(g):
            a._acc(_unbroadcast(g, a.data.shape))
            b._acc(_unbroadcast(-g, b.data.shape))

        out._bw = bw
        return out

    def __rsub__(self, other):
        return as_var(other).__sub__(self)

    def __mul__(self, other):
        a, b = self, as_var(other)
        out = Var(a.data * b.data, (a, b))

        def bw(g):
            a._acc(_unbroadcast(g * b.data, a.data.shape))
            b._acc(_unbroadcast(g * a.data, b.data.shape))

        out._bw = bw
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self, as_var(other)
        out = Var(a.data / b.data, (a, b))

        def bw(g):
            a._acc(_unbroadcast(g / b.data, a.data.shape))
            b._acc(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

        out._bw = bw
        return out

    def __rtruediv__(self, other):
        return as_var(other).__truediv__(self)

    def __pow__(self, p):
        if not isinstance(p, (int, float)):
            raise TypeError("Var ** exponent must be a plain number")
        a = self
        out = Var(a.data ** p, (a,))
        out._bw = lambda g: a._acc(g * p * a.data ** (p - 1))
        return out

    def __matmul__(self, other):
        a, b = self, as_var(other)
        out = Var(a.data @ b.data, (a, b))

        def bw(g):
            if a.data.ndim == 1:
                a._acc(g @ b.data.T if b.data.ndim == 2 else g * b.data)
            else:
                a._acc(g @ b.data.T)
            if b.data.ndim == 1:
                b._acc(a.data.T @ g if a.data.ndim == 2 else a.data * g)
            else:
                ad = a.data if a.data.ndim == 2 else a.data[None, :]
                gg = g if g.ndim == 2 else g[None, :]
                b._acc(ad.T @ gg)

        out._bw = bw
        return out

    def __rmatmul__(self, other):
        return as_var(other).__matmul__(self)

    def __getitem__(self, idx):
        a = self
        out = Var(a.data[idx], (a,))

        def bw(g):
            full = np.zeros_like(a.data)
            np.add.at(full, idx, g)
            a._acc(full)

        out._bw = bw
        return out

    # ---- unary math used by elementwise dispatchers ---------------------

    def _exp(self):
        a = self
        e = np.exp(a.data)
        out = Var(e, (a,))
        out._bw = lambda g: a._acc(g * e)
        return out

    def _log(self):
        a = self
        out = Var(np.log(a.data), (a,))
        out._bw = lambda g: a._acc(g / a.data)
        return out

    def _sqrt(self):
        a = self
        r = np.sqrt(a.data)
        out = Var(r, (a,))
        out._bw = lambda g: a._acc(g * 0.5 / r)
        return out

    def _tanh(self):
        a = self
        t = np.tanh(a.data)
        out = Var(t, (a,))
        out._bw = lambda g: a._acc(g * (1.0 - t * t))
        return out

    def _square(self):
        a = self
        out = Var(a.data * a.data, (a,))
        out._bw = lambda g: a._acc(g * 2.0 * a.data)
        return out

    def _softplus(self):
        a = self
        out = Var(np.logaddexp(0.0, a.data), (a,))
        out._bw = lambda g: a._acc(g * _special.expit(a.data))
        return out

    def _lgamma(self):
        a = self
        out = Var(_special.gammaln(a.data), (a,))
        out._bw = lambda g: a._acc(g * _special.psi(a.data))
        return out

    def _sum(self, axis=None):
        a = self
        out = Var(a.data.sum(axis=axis), (a,))

        def bw(g):
            if axis is None:
                a._acc(np.broadcast_to(g, a.data.shape).copy())
            else:
                a._acc(np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

        out._bw = bw
        return out

    # ---- tape sweep -----------------------------------------------------

    def backward(self):
        """Accumulate gradients of this (scalar) node into every parent."""
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        order = []
        seen = set()
        stack = [(self, iter(self._parents))]
        seen.add(id(self))
        while stack:
            node, it = stack[-1]
            advanced = False
            for parent in it:
                if id(parent) not in seen:
                    seen.add(id(parent))
                    stack.append((parent, iter(parent._parents)))
                    advanced = True
                    break
            if not advanced:
                order.append(node)
                stack.pop()
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._bw is not None and node.grad is not None:
                node._bw(node.grad)


def as_var(x):
    return x if isinstance(x, Var) else Var(x)


# ---- type-dispatching helpers (work on Var or plain arrays/scalars) ------

def exp(x):
    return x._exp() if isinstance(x, Var) else np.exp(x)


def log(x):
    return x._log() if isinstance(x, Var) else np.log(x)


def sqrt(x):
    return x._sqrt() if isinstance(x, Var) else np.sqrt(x)


def tanh(x):
    return x._tanh() if isinstance(x, Var) else np.tanh(x)


def square(x):
    return x._square() if isinstance(x, Var) else np.square(x)


def softplus(x):
    return x._softplus() if isinstance(x, Var) else np.logaddexp(0.0, x)


def lgamma(x):
    return x._lgamma() if isinstance(x, Var) else _special.gammaln(x)


def vsum(x, axis=None):
    return x._sum(axis=axis) if isinstance(x, Var) else np.sum(x, axis=axis)


def matmul(a, b):
    if isinstance(a, Var) or isinstance(b, Var):
        return as_var(a) @ b
    return a @ b
