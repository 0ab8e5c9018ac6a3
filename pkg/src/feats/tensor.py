"""Minimal define-by-run reverse-mode differentiation over float64 numpy arrays.

Every operation returns a new :class:`Tensor` holding its value, its parent
tensors and a closure that maps the output gradient to parent gradients.
Calling :func:`backward` on a scalar walks the recorded graph in reverse
topological order and accumulates gradients into the reachable
:class:`Parameter` objects.  The tape is rebuilt on every forward pass.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DimensionError, FeatsError

DTYPE = np.float64


class Tensor:
    __slots__ = ("data", "requires_grad", "_parents", "_backward", "grad", "name")

    def __init__(self, data, requires_grad: bool = False, _parents: tuple = (),
                 _backward: Callable | None = None, name: str | None = None):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self._parents = _parents
        self._backward = _backward
        self.grad = None
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # arithmetic -----------------------------------------------------------
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

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def backward(self):
        return backward(self)


class Parameter(Tensor):
    """A trainable leaf tensor.

    ``scaling`` marks the signed scaling coefficients that paired with
    attention scores; only those are eligible for L1/L2 penalties.
    """

    __slots__ = ("scaling",)

    def __init__(self, data, name: str | None = None, scaling: bool = False):
        super().__init__(np.array(data, dtype=DTYPE, copy=True), requires_grad=True, name=name)
        self.scaling = scaling

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Parameter(name={self.name!r}, shape={self.shape}, scaling={self.scaling})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _needs_grad(*ts: Tensor) -> bool:
    return any(t.requires_grad for t in ts)


def _make(data, parents: tuple, fn: Callable) -> Tensor:
    if _needs_grad(*parents):
        return Tensor(data, requires_grad=True, _parents=parents, _backward=fn)
    return Tensor(data)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# elementwise ---------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _make(a.data + b.data, (a, b), fn)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _make(a.data - b.data, (a, b), fn)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def fn(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return _make(a.data * b.data, (a, b), fn)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def fn(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * out / b.data, b.shape))

    return _make(out, (a, b), fn)


def relu(x) -> Tensor:
    """Elementwise max(x, 0); the subgradient at exactly 0 is 0."""
    x = as_tensor(x)
    mask = x.data > 0
    return _make(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    out = _sigmoid_np(x.data)
    return _make(out, (x,), lambda g: (g * out * (1.0 - out),))


def _sigmoid_np(v: np.ndarray) -> np.ndarray:
    # branch on sign so exp never overflows
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    ev = np.exp(v[~pos])
    out[~pos] = ev / (1.0 + ev)
    return out


def exp(x) -> Tensor:
    x = as_tensor(x)
    out = np.exp(x.data)
    return _make(out, (x,), lambda g: (g * out,))


def log(x) -> Tensor:
    x = as_tensor(x)
    return _make(np.log(x.data), (x,), lambda g: (g / x.data,))


def tabs(x) -> Tensor:
    x = as_tensor(x)
    return _make(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),))


def square(x) -> Tensor:
    x = as_tensor(x)
    return _make(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,))


def clip(x, lo: float, hi: float) -> Tensor:
    x = as_tensor(x)
    inside = (x.data >= lo) & (x.data <= hi)
    return _make(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,))


# reductions and reshaping ----------------------------------------------------

def tsum(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return _make(out, (x,), fn)


def tmean(x, axis=None, keepdims=False) -> Tensor:
    x = as_tensor(x)
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return tsum(x, axis=axis, keepdims=keepdims) * (1.0 / n)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return _make(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def getitem(x, index) -> Tensor:
    x = as_tensor(x)

    def fn(g):
        out = np.zeros_like(x.data)
        np.add.at(out, index, g)
        return (out,)

    return _make(x.data[index], (x,), fn)


def concat(ts: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in ts]
    out = np.concatenate([t.data for t in ts], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def fn(g):
        return tuple(np.split(g, bounds, axis=axis))

    return _make(out, tuple(ts), fn)


def stack(ts: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in ts]
    out = np.stack([t.data for t in ts], axis=axis)

    def fn(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(ts)))

    return _make(out, tuple(ts), fn)


# linear algebra -------------------------------------------------------------

def matmul(a, b) -> Tensor:
    """Matrix product with numpy broadcasting over leading batch axes."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 1 or b.ndim < 1 or a.shape[-1] != (b.shape[0] if b.ndim == 1 else b.shape[-2]):
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = a.data @ b.data

    def fn(g):
        if b.ndim == 1:
            ga = g[..., None] * b.data
            gb = (a.data * g[..., None]).reshape(-1, b.shape[0]).sum(axis=0)
            return _unbroadcast(ga, a.shape), gb
        if a.ndim == 1:
            ga = g @ np.swapaxes(b.data, -1, -2)
            gb = a.data[:, None] * g[..., None, :]
            return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)
        ga = g @ np.swapaxes(b.data, -1, -2)
        if b.ndim == 2:
            # fold every batch axis of a into rows: one BLAS call
            k = a.shape[-1]
            gb = a.data.reshape(-1, k).T @ g.reshape(-1, b.shape[1])
        else:
            gb = _unbroadcast(np.swapaxes(a.data, -1, -2) @ g, b.shape)
        return _unbroadcast(ga, a.shape), gb

    return _make(out, (a, b), fn)


def softmax_np(v: np.ndarray, axis: int = -1) -> np.ndarray:
    z = v - v.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def softmax(x, axis: int = -1) -> Tensor:
    """Numerically stable softmax (max-shifted) along ``axis``."""
    x = as_tensor(x)
    if x.data.size == 0 or x.shape[axis] == 0:
        raise ValueError("softmax of an empty vector")
    out = softmax_np(x.data, axis)

    def fn(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return _make(out, (x,), fn)


def log_softmax(x, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

    def fn(g):
        return (g - np.exp(out) * g.sum(axis=axis, keepdims=True),)

    return _make(out, (x,), fn)


def sliding_windows(x, tau: int) -> Tensor:
    """Zero-padded windows of half-width ``tau`` along the last axis.

    ``x`` has shape (B, m, L); the result has shape (B, L, m, 2*tau+1) with
    ``out[b, k, j, tau + l] = x[b, j, k + l]`` and zeros where ``k + l`` is
    outside ``[0, L)``.
    """
    x = as_tensor(x)
    B, m, L = x.shape
    width = 2 * tau + 1
    padded = np.zeros((B, m, L + 2 * tau), dtype=DTYPE)
    padded[:, :, tau:tau + L] = x.data
    out = np.empty((B, L, m, width), dtype=DTYPE)
    for off in range(width):
        out[:, :, :, off] = padded[:, :, off:off + L].transpose(0, 2, 1)

    def fn(g):
        gp = np.zeros((B, m, L + 2 * tau), dtype=DTYPE)
        for off in range(width):
            gp[:, :, off:off + L] += g[:, :, :, off].transpose(0, 2, 1)
        return (gp[:, :, tau:tau + L],)

    return _make(out, (x,), fn)


# reverse pass ---------------------------------------------------------------

def _topological(root: Tensor) -> list:
    order, seen = [], set()
    stack_ = [(root, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack_.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack_.append((p, False))
    return order


def backward(loss: Tensor) -> dict:
    """Accumulate d(loss)/d(param) into ``param.grad`` for every reachable parameter.

    Returns a mapping from parameter name (or id when unnamed) to its gradient.
    """
    if loss.data.size != 1:
        raise FeatsError(f"backward requires a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return {}
    order = _topological(loss)
    grads = {id(loss): np.ones_like(loss.data)}
    registry = {}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g if node.grad is None else node.grad + g
            registry[node.name if node.name is not None else id(node)] = node.grad
            continue
        for parent, pg in zip(node._parents, node._backward(g)):
            if not parent.requires_grad or pg is None:
                continue
            key = id(parent)
            grads[key] = pg if key not in grads else grads[key] + pg
    return registry


def zero_grad(params: Iterable[Parameter]):
    for p in params:
        p.grad = None


def gradient_check(loss_fn: Callable[[], Tensor], params: Sequence[Parameter],
                   h: float = 1e-6, floor: float = 1e-8) -> dict:
    """Compare autodiff gradients with central finite differences.

    Returns a mapping from parameter name to relative error
    ``||g_auto - g_fd|| / max(||g_auto||, ||g_fd||, floor)``.
    """
    zero_grad(params)
    backward(loss_fn())
    errors = {}
    for i, p in enumerate(params):
        analytic = np.zeros_like(p.data) if p.grad is None else p.grad.copy()
        numeric = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        nflat = numeric.reshape(-1)
        for idx in range(flat.size):
            orig = flat[idx]
            flat[idx] = orig + h
            fp = loss_fn().item()
            flat[idx] = orig - h
            fm = loss_fn().item()
            flat[idx] = orig
            nflat[idx] = (fp - fm) / (2.0 * h)
        denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric), floor)
        errors[p.name if p.name is not None else f"param{i}"] = float(
            np.linalg.norm(analytic - numeric) / denom)
    zero_grad(params)
    return errors
