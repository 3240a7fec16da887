"""Dense tensors with a reverse-mode tape.

Every differentiable operation appends one node (output, inputs, backward
rule) to a thread-local tape. :func:`backward` walks that tape once in
reverse, accumulating into ``.grad`` of leaf tensors, then clears it.
"""
import contextlib
import math
import threading

import numpy as np
from scipy.special import erf

_DTYPES = {"float32": np.float32, "float64": np.float64}
_state = threading.local()


class NonFiniteError(FloatingPointError):
    """An operation produced NaN or Inf."""


class ContractError(ValueError):
    """A documented precondition of an operation was violated."""


def _local():
    try:
        _state.tape
    except AttributeError:
        _state.tape = []
        _state.enabled = True
        _state.dtype = _global_dtype[0]
    return _state


_global_dtype = [np.float32]


def set_default_dtype(name):
    """Select float32 (training, benchmarks) or float64 (gradient checks)."""
    _global_dtype[0] = _DTYPES[name]
    _local().dtype = _DTYPES[name]


def get_default_dtype():
    return _local().dtype


@contextlib.contextmanager
def default_dtype(name):
    st = _local()
    prev = st.dtype
    st.dtype = _DTYPES[name]
    try:
        yield
    finally:
        st.dtype = prev


@contextlib.contextmanager
def no_grad():
    st = _local()
    prev = st.enabled
    st.enabled = False
    try:
        yield
    finally:
        st.enabled = prev


def grad_enabled():
    return _local().enabled


def tape_length():
    return len(_local().tape)


def clear_tape():
    _local().tape.clear()


class _Node:
    __slots__ = ("out", "inputs", "backward")

    def __init__(self, out, inputs, backward):
        self.out = out
        self.inputs = inputs
        self.backward = backward


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_leaf", "name")

    def __init__(self, data, requires_grad=False, name=None, dtype=None):
        with np.errstate(over="ignore"):
            arr = np.asarray(data, dtype=dtype or get_default_dtype())
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"non-finite values in tensor {name or ''}".strip())
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self._leaf = True
        self.name = name

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
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else self.data.item()

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def backward(self):
        backward(self)

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def record(out_data, inputs, backward_fn, op="op"):
    """Wrap ``out_data`` as a Tensor and put the op on the tape.

    ``backward_fn(g)`` receives the output gradient and returns one gradient
    (or None) per input.
    """
    st = _local()
    data = out_data if getattr(out_data, "dtype", None) == st.dtype else np.asarray(out_data, dtype=st.dtype)
    # NaN/Inf anywhere propagates into the sum
    if not math.isfinite(np.add.reduce(data, axis=None)):
        if not np.all(np.isfinite(data)):
            raise NonFiniteError(f"{op} produced non-finite values")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._leaf = False
    out.name = None
    out.requires_grad = st.enabled and any(t.requires_grad for t in inputs)
    if out.requires_grad:
        st.tape.append(_Node(out, tuple(inputs), backward_fn))
    return out


def backward(loss):
    """Accumulate d(loss)/d(leaf) into every requires_grad leaf's ``.grad``."""
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    st = _local()
    if loss._leaf:
        if loss.requires_grad:
            _accumulate(loss, np.ones_like(loss.data))
        st.tape.clear()
        return
    pending = {id(loss): np.ones_like(loss.data)}
    for node in reversed(st.tape):
        g = pending.pop(id(node.out), None)
        if g is None:
            continue
        for inp, gi in zip(node.inputs, node.backward(g)):
            if gi is None or not inp.requires_grad:
                continue
            if inp._leaf:
                _accumulate(inp, gi)
            else:
                key = id(inp)
                pending[key] = pending[key] + gi if key in pending else gi
    st.tape.clear()


def _accumulate(t, g):
    g = np.asarray(g, dtype=t.data.dtype).reshape(t.shape)
    t.grad = g.copy() if t.grad is None else t.grad + g


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    ndiff = g.ndim - len(shape)
    if ndiff > 0:
        g = g.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


# elementwise ---------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data
    return record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)), "add")


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data
    return record(out, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)), "sub")


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data
    return record(
        out, (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
        "mul",
    )


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def bw(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return record(out, (a, b), bw, "div")


def exp(x):
    with np.errstate(over="ignore"):  # overflow is reported by record()
        out = np.exp(x.data)
    return record(out, (x,), lambda g: (g * out,), "exp")


def gelu(x):
    """Exact GELU, ``x * Phi(x)``."""
    cdf = 0.5 * (1.0 + erf(x.data / np.sqrt(2.0)))
    pdf = np.exp(-0.5 * x.data * x.data) / np.sqrt(2.0 * np.pi)
    return record(x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),), "gelu")


def dropout(x, rate, rng, training=True):
    """Inverted dropout; identity when not training or rate == 0."""
    if not training or rate == 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
    mask = (rng.random(x.shape) >= rate).astype(x.data.dtype) / (1.0 - rate)
    return record(x.data * mask, (x,), lambda g: (g * mask,), "dropout")


# reductions and shape ------------------------------------------------------

def sum_(x, axis=None, keepdims=False):
    out = np.sum(x.data, axis=axis, keepdims=keepdims)

    def bw(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape),)

    return record(out, (x,), bw, "sum")


def mean(x, axis=None, keepdims=False):
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return sum_(x, axis, keepdims) * (1.0 / n)


def reshape(x, shape):
    out = x.data.reshape(shape)
    return record(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def transpose(x, axes=None):
    axes = tuple(range(x.ndim))[::-1] if axes is None else tuple(axes)
    inv = np.argsort(axes)
    return record(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inv),), "transpose")


def getitem(x, idx):
    out = x.data[idx]

    def bw(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        return (full,)

    return record(out, (x,), bw, "getitem")


def concat(tensors, axis=-1):
    tensors = [as_tensor(t) for t in tensors]
    out = np.concatenate([t.data for t in tensors], axis=axis)
    cuts = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return record(out, tensors, lambda g: tuple(np.split(g, cuts, axis=axis)), "concat")


# linear algebra ------------------------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ContractError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ContractError(f"matmul batch dimensions not broadcastable: {a.shape} x {b.shape}") from None

    def bw(g):
        ga = gb = None
        if a.requires_grad:
            ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        if b.requires_grad:
            gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return ga, gb

    return record(out, (a, b), bw, "matmul")


def softmax(x, axis=-1):
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)
    return record(y, (x,), lambda g: (y * (g - np.sum(g * y, axis=axis, keepdims=True)),), "softmax")


def layer_norm(x, gamma, beta, eps=1e-5):
    """LayerNorm over the last axis with affine ``gamma``/``beta``."""
    c = x.shape[-1]
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ContractError(f"layer_norm affine shapes {gamma.shape}, {beta.shape} do not match last axis {c}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    rstd = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * rstd
    out = xhat * gamma.data + beta.data

    def bw(g):
        red = tuple(range(g.ndim - 1))
        dgamma = (g * xhat).sum(axis=red)
        dbeta = g.sum(axis=red)
        dxhat = g * gamma.data
        dx = rstd * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                     - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
        return dx, dgamma, dbeta

    return record(out, (x, gamma, beta), bw, "layer_norm")


def norm(x, axis=-1):
    """Euclidean norm along ``axis``; the gradient at a zero vector is taken as zero."""
    n = np.sqrt(np.sum(x.data * x.data, axis=axis))

    def bw(g):
        safe = np.where(n > 0, n, 1.0)
        scale = np.where(n > 0, g / safe, 0.0)
        return (x.data * np.expand_dims(scale, axis),)

    return record(n, (x,), bw, "norm")


def linear_along_axis(x, matrix, axis):
    """Apply a constant matrix (out_len x in_len) along ``axis``."""
    m = np.asarray(matrix, dtype=x.data.dtype)
    if m.shape[1] != x.shape[axis]:
        raise ContractError(f"operator of shape {m.shape} cannot act on axis {axis} of {x.shape}")
    moved = np.moveaxis(x.data, axis, -1)
    out = np.moveaxis(moved @ m.T, -1, axis)
    return record(out, (x,), lambda g: (np.moveaxis(np.moveaxis(g, axis, -1) @ m, -1, axis),), "linear_along_axis")
