"""Dense float64 arrays with reverse-mode differentiation.

Small tape-based autodiff, just enough for MLPs and message passing:
each op computes the forward value and, when gradients are enabled,
registers a closure that pushes adjoints to its parents. ``backward``
runs the closures in reverse topological order from a scalar loss.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager

import numpy as np

_ids = itertools.count()
_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (forward values only)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "tape_id")

    # make ndarray <op> Tensor defer to the reflected Tensor methods
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, _parents=()):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = requires_grad and _grad_enabled
        self._parents = _parents if self.requires_grad else ()
        self._backward = None
        self.tape_id = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Reverse pass from this scalar: fills .grad on every node that needs it."""
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar, got shape {self.data.shape}")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self._accumulate(np.ones_like(self.data))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self):
        return transpose(self)

    def sum(self, axis=None):
        return tsum(self, axis)

    def mean(self, axis=None):
        return tmean(self, axis)

    def reshape(self, *shape):
        return reshape(self, shape)

    def relu(self):
        return relu(self)

    def sigmoid(self):
        return sigmoid(self)

    def exp(self):
        return exp(self)

    def log(self):
        return log(self)

    def sqrt(self):
        return sqrt(self)

    def clip(self, lo, hi):
        return clip(self, lo, hi)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    """A leaf tensor that collects gradients."""
    return Tensor(data, requires_grad=True)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient back down to `shape` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _binary(a, b, fwd, bwd_a, bwd_b, opname: str) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = fwd(a.data, b.data)
    except ValueError:
        raise ValueError(f"{opname}: incompatible shapes {a.data.shape} and {b.data.shape}")
    out = Tensor(data, requires_grad=a.requires_grad or b.requires_grad, _parents=(a, b))
    if out.requires_grad:
        def _backward(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(bwd_a(g), a.data.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(bwd_b(g), b.data.shape))
        out._backward = _backward
    return out


def add(a, b) -> Tensor:
    return _binary(a, b, lambda x, y: x + y, lambda g: g, lambda g: g, "add")


def sub(a, b) -> Tensor:
    return _binary(a, b, lambda x, y: x - y, lambda g: g, lambda g: -g, "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _binary(a, b, lambda x, y: x * y, lambda g: g * b.data, lambda g: g * a.data, "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _binary(
        a, b,
        lambda x, y: x / y,
        lambda g: g / b.data,
        lambda g: -g * a.data / (b.data * b.data),
        "div",
    )


def neg(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(-a.data, requires_grad=a.requires_grad, _parents=(a,))
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(-g)
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.data.shape} and {b.data.shape}")
    out = Tensor(a.data @ b.data, requires_grad=a.requires_grad or b.requires_grad, _parents=(a, b))
    if out.requires_grad:
        def _backward(g):
            if a.requires_grad:
                a._accumulate(g @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        out._backward = _backward
    return out


def transpose(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.T, requires_grad=a.requires_grad, _parents=(a,))
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(g.T)
    return out


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.reshape(shape), requires_grad=a.requires_grad, _parents=(a,))
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(g.reshape(a.data.shape))
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    needs = any(t.requires_grad for t in tensors)
    out = Tensor(data, requires_grad=needs, _parents=tuple(tensors))
    if out.requires_grad:
        sizes = [t.data.shape[axis] for t in tensors]
        offsets = np.cumsum([0] + sizes)
        def _backward(g):
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    idx = [slice(None)] * g.ndim
                    idx[axis] = slice(lo, hi)
                    t._accumulate(g[tuple(idx)])
        out._backward = _backward
    return out


def tsum(a, axis=None) -> Tensor:
    a = as_tensor(a)
    out = Tensor(a.data.sum(axis=axis), requires_grad=a.requires_grad, _parents=(a,))
    if out.requires_grad:
        def _backward(g):
            if axis is None:
                a._accumulate(np.broadcast_to(g, a.data.shape).copy())
            else:
                a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())
        out._backward = _backward
    return out


def tmean(a, axis=None) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis), 1.0 / count)


def relu(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.maximum(a.data, 0.0), requires_grad=a.requires_grad, _parents=(a,))
    if out.requires_grad:
        # subgradient at 0 is 0
        out._backward = lambda g: a._accumulate(g * (a.data > 0.0))
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    y = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
    out = Tensor(y, requires_grad=a.requires_grad, _parents=(a,))
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(g * y * (1.0 - y))
    return out


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.data)
    out = Tensor(y, requires_grad=a.requires_grad, _parents=(a,))
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(g * y)
    return out


def log(a) -> Tensor:
    a = as_tensor(a)
    out = Tensor(np.log(a.data), requires_grad=a.requires_grad, _parents=(a,))
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(g / a.data)
    return out


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    y = np.sqrt(a.data)
    out = Tensor(y, requires_grad=a.requires_grad, _parents=(a,))
    if out.requires_grad:
        out._backward = lambda g: a._accumulate(g * 0.5 / y)
    return out


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient passes through the interior only."""
    a = as_tensor(a)
    out = Tensor(np.clip(a.data, lo, hi), requires_grad=a.requires_grad, _parents=(a,))
    if out.requires_grad:
        mask = (a.data >= lo) & (a.data <= hi)
        out._backward = lambda g: a._accumulate(g * mask)
    return out


def softmax_rows(a) -> Tensor:
    """Row-wise softmax of a 2-D tensor."""
    a = as_tensor(a)
    if a.data.ndim != 2:
        raise ValueError(f"softmax_rows needs a 2-D input, got shape {a.data.shape}")
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y, requires_grad=a.requires_grad, _parents=(a,))
    if out.requires_grad:
        def _backward(g):
            dot = (g * y).sum(axis=1, keepdims=True)
            a._accumulate(y * (g - dot))
        out._backward = _backward
    return out


def grad_check(f, x, eps: float = 1e-5, max_coords: int | None = None, seed: int = 0) -> float:
    """Max relative error between tape gradients and central differences.

    ``x`` is a Tensor or a dict of named Tensors; ``f(x)`` must return a
    scalar Tensor. Every coordinate is perturbed by ``eps`` both ways
    unless ``max_coords`` caps the sweep, in which case a seeded uniform
    subsample of coordinates is checked instead.
    """
    if not 1e-6 <= eps <= 1e-4:
        raise ValueError(f"eps must lie in [1e-6, 1e-4], got {eps}")
    leaves = x if isinstance(x, dict) else {"x": x}
    for t in leaves.values():
        t.zero_grad()
    out = f(x)
    if not np.isfinite(out.data).all():
        raise FloatingPointError("function value is not finite")
    out.backward()
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.data))
        for name, t in leaves.items()
    }

    coords = [(name, idx) for name, t in leaves.items() for idx in range(t.data.size)]
    if max_coords is not None and len(coords) > max_coords:
        rng = np.random.default_rng(seed)
        pick = rng.choice(len(coords), size=max_coords, replace=False)
        coords = [coords[i] for i in sorted(pick)]

    worst = 0.0
    with no_grad():
        for name, idx in coords:
            flat = leaves[name].data.reshape(-1)
            orig = flat[idx]
            flat[idx] = orig + eps
            hi = float(f(x).data)
            flat[idx] = orig - eps
            lo = float(f(x).data)
            flat[idx] = orig
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise FloatingPointError("finite-difference evaluation is not finite")
            numeric = (hi - lo) / (2.0 * eps)
            a = analytic[name].reshape(-1)[idx]
            err = abs(a - numeric) / max(1.0, abs(numeric))
            if err > worst:
                worst = err
    return worst
