"""Dense f64 tensors with a reverse-mode tape.

Every op records a vector-Jacobian product written in terms of other tensor
ops, so a backward pass run with ``create_graph=True`` is itself
differentiable.  The gradient penalty on the critic needs exactly one level of
that.
"""

from __future__ import annotations

import contextlib

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


@contextlib.contextmanager
def _grad_mode(enabled):
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = enabled
    try:
        yield
    finally:
        _grad_enabled = prev


def is_grad_enabled():
    return _grad_enabled


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class Tensor:
    __array_ufunc__ = None
    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False, _parents=(), _vjp=None, op="leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad = None
        self.op = op
        self._parents = _parents
        self._vjp = _vjp

    @classmethod
    def _make(cls, data, parents, vjp, op):
        if not np.isfinite(data).all():
            raise FloatingPointError(f"non-finite values produced by {op}")
        if _grad_enabled and any(p.requires_grad for p in parents):
            return cls(data, True, parents, vjp, op)
        return cls(data)

    # -- introspection -------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op!r}, requires_grad={self.requires_grad})"

    def __len__(self):
        return len(self.data)

    # -- elementwise arithmetic ----------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape
        return Tensor._make(
            self.data + other.data,
            (self, other),
            lambda g: (_unbroadcast(g, a_shape), _unbroadcast(g, b_shape)),
            "add",
        )

    __radd__ = __add__

    def __neg__(self):
        return Tensor._make(-self.data, (self,), lambda g: (-g,), "neg")

    def __sub__(self, other):
        return self + (-as_tensor(other))

    def __rsub__(self, other):
        return as_tensor(other) + (-self)

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return Tensor._make(
            a.data * b.data,
            (a, b),
            lambda g: (_unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)),
            "mul",
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self, other
        return Tensor._make(
            a.data / b.data,
            (a, b),
            lambda g: (_unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)),
            "div",
        )

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, p):
        if isinstance(p, Tensor):
            raise TypeError("only scalar exponents are supported")
        a = self
        if p == 2:
            return a * a
        return Tensor._make(a.data**p, (a,), lambda g: (g * p * a ** (p - 1),), "pow")

    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self, other
        if a.ndim != 2 or b.ndim != 2:
            raise ValueError(f"matmul expects 2-D operands, got {a.shape} @ {b.shape}")
        return Tensor._make(a.data @ b.data, (a, b), lambda g: (g @ b.T, a.T @ g), "matmul")

    # -- shape ops -----------------------------------------------------

    @property
    def T(self):
        return Tensor._make(self.data.T, (self,), lambda g: (g.T,), "transpose")

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        in_shape = self.shape
        return Tensor._make(
            self.data.reshape(shape), (self,), lambda g: (g.reshape(in_shape),), "reshape"
        )

    def expand(self, shape):
        in_shape = self.shape
        return Tensor._make(
            np.broadcast_to(self.data, shape).copy(),
            (self,),
            lambda g: (_unbroadcast(g, in_shape),),
            "expand",
        )

    def sum(self, axis=None, keepdims=False):
        in_shape = self.shape
        out = self.data.sum(axis=axis, keepdims=keepdims)

        def vjp(g):
            if axis is None:
                kept = (1,) * len(in_shape)
            else:
                axes = (axis,) if isinstance(axis, int) else tuple(axis)
                axes = tuple(ax % len(in_shape) for ax in axes)
                kept = tuple(1 if i in axes else n for i, n in enumerate(in_shape))
            return (g.reshape(kept).expand(in_shape),)

        return Tensor._make(out, (self,), vjp, "sum")

    def mean(self, axis=None, keepdims=False):
        if axis is None:
            n = self.size
        else:
            axes = (axis,) if isinstance(axis, int) else tuple(axis)
            n = int(np.prod([self.shape[ax] for ax in axes]))
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    # -- nonlinearities ------------------------------------------------

    def exp(self):
        # overflow surfaces as the non-finite check in _make
        with np.errstate(over="ignore"):
            out = np.exp(self.data)
        node = None

        def vjp(g):
            return (g * node,)

        node = Tensor._make(out, (self,), vjp, "exp")
        return node

    def log(self):
        a = self
        return Tensor._make(np.log(a.data), (a,), lambda g: (g / a,), "log")

    def sqrt(self):
        node = None

        def vjp(g):
            return (g * 0.5 / node,)

        node = Tensor._make(np.sqrt(self.data), (self,), vjp, "sqrt")
        return node

    def tanh(self):
        node = None

        def vjp(g):
            return (g * (1.0 - node * node),)

        node = Tensor._make(np.tanh(self.data), (self,), vjp, "tanh")
        return node

    def relu(self):
        mask = (self.data > 0).astype(np.float64)
        return Tensor._make(self.data * mask, (self,), lambda g: (g * mask,), "relu")

    def clamp_min(self, floor):
        mask = (self.data > floor).astype(np.float64)
        return Tensor._make(np.maximum(self.data, floor), (self,), lambda g: (g * mask,), "clamp_min")

    def softmax(self, axis=-1):
        shifted = self - self.data.max(axis=axis, keepdims=True)
        e = shifted.exp()
        return e / e.sum(axis=axis, keepdims=True)

    def log_softmax(self, axis=-1):
        shifted = self - self.data.max(axis=axis, keepdims=True)
        return shifted - shifted.exp().sum(axis=axis, keepdims=True).log()

    def row_norm(self):
        """Euclidean norm of each row of a 2-D tensor; gradient is 0 at the origin."""
        a = self
        out = np.sqrt((a.data * a.data).sum(axis=1))
        safe = np.where(out > 0, out, 1.0)
        inv = np.where(out > 0, 1.0 / safe, 0.0)
        # 1/‖a‖ is held constant in the VJP: first-order exact, no third derivatives
        return Tensor._make(
            out, (a,), lambda g: (a * (g * inv).reshape(-1, 1),), "row_norm"
        )


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (inverse of numpy broadcasting)."""
    if g.shape == tuple(shape):
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _toposort(root):
    order, seen = [], set()
    stack = [(root, False)]
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
    return order


def _propagate(root, seed, create_graph):
    grads = {id(root): seed}
    for node in reversed(_toposort(root)):
        g = grads.get(id(node))
        if g is None or node._vjp is None:
            continue
        with _grad_mode(create_graph):
            parent_grads = node._vjp(g)
        for p, pg in zip(node._parents, parent_grads):
            if pg is None or not p.requires_grad:
                continue
            prev = grads.get(id(p))
            if prev is None:
                grads[id(p)] = pg
            else:
                with _grad_mode(create_graph):
                    grads[id(p)] = prev + pg
    return grads


def _seed_for(root, seed):
    if seed is None:
        if root.size != 1:
            raise ValueError(
                f"backward needs a scalar root or an explicit seed gradient; root has shape {root.shape}"
            )
        return Tensor(np.ones_like(root.data))
    seed = as_tensor(seed)
    if seed.shape != root.shape:
        raise ValueError(f"seed gradient shape {seed.shape} does not match root shape {root.shape}")
    return seed


def grad(root, inputs, seed=None, create_graph=False):
    """Return d(root)/d(input) for each input as tensors.

    Inputs the root does not depend on get zeros.  With ``create_graph`` the
    returned tensors stay attached to the tape and can be differentiated again.
    """
    grads = _propagate(root, _seed_for(root, seed), create_graph)
    out = []
    for x in inputs:
        g = grads.get(id(x))
        out.append(g if g is not None else Tensor(np.zeros_like(x.data)))
    return out


def backward(root, seed=None):
    """Accumulate d(root)/d(leaf) into ``.grad`` of every reachable leaf.

    ``seed`` injects an upstream gradient at a non-scalar root.
    """
    if not root.requires_grad:
        return
    grads = _propagate(root, _seed_for(root, seed), create_graph=False)
    for node in _toposort(root):
        if node._vjp is None and node.requires_grad:
            g = grads.get(id(node))
            if g is None:
                continue
            if node.grad is None:
                node.grad = g.data.copy()
            else:
                node.grad = node.grad + g.data
