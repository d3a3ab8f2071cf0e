"""Minimal reverse-mode automatic differentiation over numpy arrays.

Every tensor is a float64 ndarray wrapped in a graph node. Operations record
vector-Jacobian products; ``backward`` walks the graph in reverse topological
order and accumulates gradients into the leaves. The op set is deliberately
small: exactly what the aggregation model, the discriminator, and the losses
need, each with a hand-written VJP.

Recording can be switched off globally with ``no_grad()`` for cheap
evaluation-only passes; in that mode every op returns a plain leaf.
"""

from __future__ import annotations

import numpy as np

_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables graph recording."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    """A node in the computation graph wrapping a float64 ndarray."""

    __slots__ = ("value", "grad", "parents", "requires_grad")

    def __init__(self, value, requires_grad=False, parents=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self.parents = parents  # tuple of (Tensor, vjp callable)

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def item(self):
        return float(self.value)

    def detach(self):
        return Tensor(self.value)

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _node(value, *links):
    """Create a graph node; links are (input, vjp) pairs."""
    if _GRAD_ENABLED:
        parents = tuple((t, f) for t, f in links if t.requires_grad)
        if parents:
            return Tensor(value, requires_grad=True, parents=parents)
    return Tensor(value)


def _unbroadcast(g, shape):
    """Sum gradient over axes that numpy broadcasting expanded."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.value + b.value,
        (a, lambda g: _unbroadcast(g, a.value.shape)),
        (b, lambda g: _unbroadcast(g, b.value.shape)),
    )


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.value - b.value,
        (a, lambda g: _unbroadcast(g, a.value.shape)),
        (b, lambda g: _unbroadcast(-g, b.value.shape)),
    )


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.value * b.value,
        (a, lambda g: _unbroadcast(g * b.value, a.value.shape)),
        (b, lambda g: _unbroadcast(g * a.value, b.value.shape)),
    )


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    return _node(
        a.value / b.value,
        (a, lambda g: _unbroadcast(g / b.value, a.value.shape)),
        (b, lambda g: _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape)),
    )


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    av, bv = a.value, b.value

    def vjp_a(g):
        if av.ndim == 1 and bv.ndim == 2:
            return bv @ g
        if av.ndim == 2 and bv.ndim == 1:
            return np.outer(g, bv)
        if av.ndim == 1 and bv.ndim == 1:
            return g * bv
        return g @ bv.T

    def vjp_b(g):
        if av.ndim == 1 and bv.ndim == 2:
            return np.outer(av, g)
        if av.ndim == 2 and bv.ndim == 1:
            return av.T @ g
        if av.ndim == 1 and bv.ndim == 1:
            return g * av
        return av.T @ g

    return _node(av @ bv, (a, vjp_a), (b, vjp_b))


def einsum(spec, a, b):
    """Two-operand einsum where every index of each operand also appears in
    the output or the other operand (no internal reductions)."""
    a, b = as_tensor(a), as_tensor(b)
    ins, out = spec.split("->")
    sa, sb = ins.split(",")
    if not (set(sa) <= set(out) | set(sb) and set(sb) <= set(out) | set(sa)):
        raise ValueError(f"unsupported einsum pattern {spec!r}")
    val = np.einsum(spec, a.value, b.value, optimize=True)
    return _node(
        val,
        (a, lambda g: np.einsum(f"{out},{sb}->{sa}", g, b.value, optimize=True)),
        (b, lambda g: np.einsum(f"{out},{sa}->{sb}", g, a.value, optimize=True)),
    )


def sparse_gather(x, G):
    """Rows of a 2-D tensor gathered by a constant scipy sparse matrix G."""
    x = as_tensor(x)
    return _node(G @ x.value, (x, lambda g: G.T @ g))


def take_rows(x, idx):
    """x[idx] along axis 0; idx is a constant integer array."""
    x = as_tensor(x)
    idx = np.asarray(idx, dtype=np.intp)

    def vjp(g):
        out = np.zeros_like(x.value)
        np.add.at(out, idx, g)
        return out

    return _node(x.value[idx], (x, vjp))


def take_along_rows(x, cols):
    """Pick one column per row: out[i] = x[i, cols[i]]."""
    x = as_tensor(x)
    cols = np.asarray(cols, dtype=np.intp)
    rows = np.arange(x.value.shape[0])

    def vjp(g):
        out = np.zeros_like(x.value)
        np.add.at(out, (rows, cols), g)
        return out

    return _node(x.value[rows, cols], (x, vjp))


def where_rows(mask, a, b):
    """Row-wise select: rows of a where mask is True, rows of b elsewhere."""
    a, b = as_tensor(a), as_tensor(b)
    m = np.asarray(mask, dtype=bool).reshape((-1,) + (1,) * (a.value.ndim - 1))
    return _node(
        np.where(m, a.value, b.value),
        (a, lambda g: np.where(m, g, 0.0)),
        (b, lambda g: np.where(m, 0.0, g)),
    )


def reshape(x, shape):
    x = as_tensor(x)
    old = x.value.shape
    return _node(x.value.reshape(shape), (x, lambda g: g.reshape(old)))


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    val = np.stack([t.value for t in tensors], axis=axis)

    def make_vjp(i):
        return lambda g: np.take(g, i, axis=axis)

    return _node(val, *[(t, make_vjp(i)) for i, t in enumerate(tensors)])


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    val = np.concatenate([t.value for t in tensors], axis=axis)
    sizes = [t.value.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def make_vjp(i):
        sl = [slice(None)] * val.ndim
        sl[axis] = slice(offsets[i], offsets[i + 1])
        sl = tuple(sl)
        return lambda g: g[sl]

    return _node(val, *[(t, make_vjp(i)) for i, t in enumerate(tensors)])


def relu(x):
    x = as_tensor(x)
    keep = x.value > 0
    return _node(np.where(keep, x.value, 0.0), (x, lambda g: np.where(keep, g, 0.0)))


def leaky_relu(x, slope=0.2):
    x = as_tensor(x)
    pos = x.value > 0
    return _node(
        np.where(pos, x.value, slope * x.value),
        (x, lambda g: np.where(pos, g, slope * g)),
    )


def sigmoid(x):
    x = as_tensor(x)
    v = x.value
    y = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))), np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
    return _node(y, (x, lambda g: g * y * (1.0 - y)))


def exp(x):
    x = as_tensor(x)
    y = np.exp(x.value)
    return _node(y, (x, lambda g: g * y))


def log(x):
    x = as_tensor(x)
    return _node(np.log(x.value), (x, lambda g: g / x.value))


def softplus(x):
    """log(1 + e^x), overflow-safe."""
    x = as_tensor(x)
    v = x.value
    y = np.log1p(np.exp(-np.abs(v))) + np.maximum(v, 0.0)
    s = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))), np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
    return _node(y, (x, lambda g: g * s))


def clamp(x, lo, hi):
    x = as_tensor(x)
    inside = (x.value >= lo) & (x.value <= hi)
    return _node(np.clip(x.value, lo, hi), (x, lambda g: np.where(inside, g, 0.0)))


def tsum(x, axis=None, keepdims=False):
    x = as_tensor(x)
    val = x.value.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, x.value.shape).copy()
        if not keepdims:
            g = np.expand_dims(g, axis)
        return np.broadcast_to(g, x.value.shape).copy()

    return _node(val, (x, vjp))


def tmean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    count = x.value.size if axis is None else x.value.shape[axis]
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def softmax(x, axis=-1):
    x = as_tensor(x)
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        return y * (g - inner)

    return _node(y, (x, vjp))


def masked_softmax(x, mask, axis):
    """Softmax over entries with mask > 0; masked entries get exactly 0.

    Rows whose mask is all-zero yield all-zero output (no probability mass).
    """
    x = as_tensor(x)
    m = np.asarray(mask, dtype=np.float64)
    live = m > 0
    neg = np.where(live, x.value, -np.inf)
    shift = neg.max(axis=axis, keepdims=True)
    shift = np.where(np.isfinite(shift), shift, 0.0)
    e = np.exp(np.where(live, x.value - shift, 0.0)) * m
    denom = e.sum(axis=axis, keepdims=True)
    y = e / np.where(denom > 0, denom, 1.0)

    def vjp(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        return y * (g - inner)

    return _node(y, (x, vjp))


def l2_normalize(x, axis=-1, eps=1e-12):
    """Rows scaled to unit L2 norm; rows with norm <= eps pass through."""
    x = as_tensor(x)
    norm = np.sqrt(np.square(x.value).sum(axis=axis, keepdims=True))
    active = norm > eps
    safe = np.where(active, norm, 1.0)
    y = np.where(active, x.value / safe, x.value)

    def vjp(g):
        inner = (g * y).sum(axis=axis, keepdims=True)
        return np.where(active, (g - y * inner) / safe, g)

    return _node(y, (x, vjp))


def backward(out, seed_grad=None):
    """Accumulate gradients of a scalar output into every reachable leaf."""
    if out.value.size != 1:
        raise ValueError("backward expects a scalar output")
    order = []
    seen = set()
    stack = [(out, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    out.grad = np.ones_like(out.value) if seed_grad is None else np.asarray(seed_grad, dtype=np.float64)
    for node in reversed(order):
        g = node.grad
        if g is None:
            continue
        for parent, vjp in node.parents:
            if not parent.requires_grad:
                continue
            contrib = vjp(g)
            parent.grad = contrib if parent.grad is None else parent.grad + contrib
