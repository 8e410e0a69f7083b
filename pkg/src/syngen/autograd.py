"""Reverse-mode autodiff over dense float64 arrays.

A `Tensor` wraps a numpy array plus an optional gradient. Operations
record their inputs and a backward closure while gradient tracking is
enabled; `backward()` on a scalar then walks the tape in reverse
topological order and accumulates `d(loss)/d(tensor)` additively into
every reachable tensor that requires a gradient.

Tensors are treated as immutable after construction except for the
`grad` slot. The tracking switch is a module-level flag (`no_grad`), so
one recorded computation is single-owner; concurrent no-grad forward
passes over frozen tensors are fine.
"""

import contextlib

import numpy as np

from .backend import kernels as K
from .errors import DegenerateMaskError, DimensionError, RankError

_grad_enabled = True

# Test hook for the gradcheck negative control: scales the sigmoid
# backward rule, deliberately breaking the chain rule when != 1.
_grad_corruption = 1.0


def set_gradient_corruption(factor):
    global _grad_corruption
    _grad_corruption = float(factor)


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled():
    return _grad_enabled


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "name", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def backward(self):
        backward(self)

    # Arithmetic sugar; scalars are wrapped as constants.
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return add(self, scale(_as_tensor(other), -1.0))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, other)
        return hadamard(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def tensor(data, requires_grad=False, name=None):
    return Tensor(data, requires_grad=requires_grad, name=name)


def zeros(shape, requires_grad=False, name=None):
    return Tensor(np.zeros(shape), requires_grad=requires_grad, name=name)


def ones(shape, requires_grad=False, name=None):
    return Tensor(np.ones(shape), requires_grad=requires_grad, name=name)


def randn(rng, shape, std=1.0, requires_grad=False, name=None):
    return Tensor(rng.normal(0.0, std, size=shape), requires_grad=requires_grad, name=name)


def _node(data, parents, backward_fn):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to `shape`."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def backward(loss):
    """Accumulate d(loss)/d(t) into `t.grad` for every reachable tensor
    with requires_grad. `loss` must be a scalar."""
    if loss.data.size != 1:
        raise RankError(f"backward requires a scalar, got shape {loss.data.shape}")
    # Iterative post-order: recursion would overflow on deep graphs.
    topo = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))

    seed = np.ones_like(loss.data)
    loss.grad = seed if loss.grad is None else loss.grad + seed
    for node in reversed(topo):
        if node._backward is None:
            continue
        grads = node._backward(node.grad)
        for parent, g in zip(node._parents, grads):
            if g is None or not parent.requires_grad:
                continue
            parent.grad = g if parent.grad is None else parent.grad + g


# ---------------------------------------------------------------------------
# primitives


def add(a, b):
    try:
        data = a.data + b.data
    except ValueError:
        raise DimensionError(f"add: shapes {a.data.shape} and {b.data.shape} do not broadcast")

    def bwd(g):
        return (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape))

    return _node(data, (a, b), bwd)


def hadamard(a, b):
    try:
        data = a.data * b.data
    except ValueError:
        raise DimensionError(f"hadamard: shapes {a.data.shape} and {b.data.shape} do not broadcast")

    def bwd(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _node(data, (a, b), bwd)


def scale(t, c):
    c = float(c)

    def bwd(g):
        return (g * c,)

    return _node(t.data * c, (t,), bwd)


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul: shapes {a.data.shape} and {b.data.shape} are incompatible")
    data = K.matmul(a.data, b.data)

    def bwd(g):
        ga = K.matmul_nt(g, b.data) if a.requires_grad else None
        gb = K.matmul_tn(a.data, g) if b.requires_grad else None
        return (ga, gb)

    return _node(data, (a, b), bwd)


def transpose(t):
    if t.data.ndim != 2:
        raise DimensionError(f"transpose: expected 2-D, got shape {t.data.shape}")

    def bwd(g):
        return (np.ascontiguousarray(g.T),)

    return _node(np.ascontiguousarray(t.data.T), (t,), bwd)


def reshape(t, shape):
    orig = t.data.shape

    def bwd(g):
        return (g.reshape(orig),)

    return _node(t.data.reshape(shape), (t,), bwd)


def concat(tensors, axis=0):
    datas = [t.data for t in tensors]
    data = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        slicer = [slice(None)] * g.ndim
        outs = []
        for i in range(len(sizes)):
            slicer[axis] = slice(offsets[i], offsets[i + 1])
            outs.append(np.ascontiguousarray(g[tuple(slicer)]))
        return tuple(outs)

    return _node(data, tuple(tensors), bwd)


def slice_rows(t, start, stop):
    data = t.data[start:stop].copy()

    def bwd(g):
        z = np.zeros_like(t.data)
        z[start:stop] = g
        return (z,)

    return _node(data, (t,), bwd)


def slice_cols(t, start, stop):
    data = np.ascontiguousarray(t.data[:, start:stop])

    def bwd(g):
        z = np.zeros_like(t.data)
        z[:, start:stop] = g
        return (z,)

    return _node(data, (t,), bwd)


def embedding_lookup(table, ids):
    """Rows of `table` selected by integer `ids` (list or int array)."""
    idx = np.asarray(ids, dtype=np.intp)
    data = table.data[idx]

    def bwd(g):
        z = np.zeros_like(table.data)
        np.add.at(z, idx, g)
        return (z,)

    return _node(data, (table,), bwd)


def take_per_row(t, cols):
    """out[i] = t[i, cols[i]]."""
    idx = np.asarray(cols, dtype=np.intp)
    rows = np.arange(t.data.shape[0])
    data = t.data[rows, idx]

    def bwd(g):
        z = np.zeros_like(t.data)
        z[rows, idx] = g
        return (z,)

    return _node(data, (t,), bwd)


def _to_rows(data, axis):
    """View `data` as 2-D with the softmax axis last. Returns (rows, restore)."""
    if data.ndim == 1:
        if axis not in (-1, 0):
            raise DimensionError(f"axis {axis} invalid for shape {data.shape}")
        return data[None, :], lambda y: y[0]
    if data.ndim == 2:
        if axis in (-1, 1):
            return data, lambda y: y
        if axis == 0:
            return np.ascontiguousarray(data.T), lambda y: np.ascontiguousarray(y.T)
        raise DimensionError(f"axis {axis} invalid for shape {data.shape}")
    raise DimensionError(f"softmax supports 1-D/2-D tensors, got shape {data.shape}")


def softmax(t, axis=-1, mask=None):
    """Softmax along `axis`, numerically stabilized by max-subtraction.

    `mask` (optional, boolean, same shape): True entries participate,
    False entries come out exactly 0. A slice with no True entry raises
    DegenerateMaskError.
    """
    x = t.data
    if mask is not None:
        m = mask.data if isinstance(mask, Tensor) else np.asarray(mask)
        m = m.astype(bool)
        if m.shape != x.shape:
            raise DimensionError(f"mask shape {m.shape} != input shape {x.shape}")
        m2d, _ = _to_rows(m, axis)
        if not m2d.any(axis=1).all():
            raise DegenerateMaskError("softmax slice has every entry masked")
        x = np.where(m, x, -np.inf)
    x2d, restore = _to_rows(x, axis)
    y2d = K.softmax_rows(x2d)
    data = restore(y2d)

    def bwd(g):
        g2d, _ = _to_rows(np.ascontiguousarray(g), axis)
        gx = K.softmax_rows_backward(y2d, g2d)
        return (restore(gx),)

    return _node(data, (t,), bwd)


def log_softmax(t, axis=-1):
    x2d, restore = _to_rows(t.data, axis)
    y2d = K.log_softmax_rows(x2d)
    data = restore(y2d)

    def bwd(g):
        g2d, _ = _to_rows(np.ascontiguousarray(g), axis)
        gx = K.log_softmax_rows_backward(y2d, g2d)
        return (restore(gx),)

    return _node(data, (t,), bwd)


def leaky_relu(t, slope=0.2):
    if not 0.0 < slope < 1.0:
        raise ValueError(f"leaky_relu slope must lie in (0, 1), got {slope}")
    data = K.leaky_relu(t.data, slope)

    def bwd(g):
        return (K.leaky_relu_backward(t.data, g, slope),)

    return _node(data, (t,), bwd)


def relu(t):
    data = K.relu(t.data)

    def bwd(g):
        return (K.relu_backward(t.data, g),)

    return _node(data, (t,), bwd)


def sigmoid(t):
    data = K.sigmoid(t.data)

    def bwd(g):
        gx = K.sigmoid_backward(data, g)
        if _grad_corruption != 1.0:
            gx = gx * _grad_corruption
        return (gx,)

    return _node(data, (t,), bwd)


def log(t):
    """Natural log; caller guarantees positive inputs."""
    data = np.log(t.data)

    def bwd(g):
        return (g / t.data,)

    return _node(data, (t,), bwd)


def mean(t):
    n = t.data.size
    data = np.asarray(t.data.mean())

    def bwd(g):
        return (np.full_like(t.data, float(g) / n),)

    return _node(data, (t,), bwd)


def sum_all(t):
    data = np.asarray(t.data.sum())

    def bwd(g):
        return (np.full_like(t.data, float(g)),)

    return _node(data, (t,), bwd)


def layer_norm(x, gamma, beta, eps=1e-5):
    """Row-wise layer normalization: ((x - mu) / sigma) * gamma + beta."""
    if x.data.ndim != 2:
        raise DimensionError(f"layer_norm expects 2-D input, got {x.data.shape}")
    mu = x.data.mean(axis=1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    data = xhat * gamma.data + beta.data

    def bwd(g):
        dxhat = g * gamma.data
        dx = inv * (
            dxhat
            - dxhat.mean(axis=1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=1, keepdims=True)
        )
        dgamma = (g * xhat).sum(axis=0)
        dbeta = g.sum(axis=0)
        return (dx, dgamma, dbeta)

    return _node(data, (x, gamma, beta), bwd)
