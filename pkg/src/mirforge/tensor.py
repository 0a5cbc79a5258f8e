"""A small reverse-mode autodiff engine over numpy arrays.

Each operation that touches a tensor with ``requires_grad`` returns a new
tensor holding references to its inputs and a closure mapping the output
gradient to input gradients. ``backward`` walks that graph in reverse
topological order. Graphs are rebuilt on every forward pass.

All data is float64.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "Tensor",
    "no_grad",
    "backward",
    "grad_check",
    "add", "sub", "mul", "div", "neg", "matmul", "transpose", "reshape", "concat", "stack",
    "reduce_sum", "reduce_mean", "reduce_max", "pad", "clip",
    "logistic", "tanh", "relu", "leaky_relu", "exp", "log", "conv2d_raw",
]

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block."""
    global _grad_enabled
    prev, _grad_enabled = _grad_enabled, False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __array_priority__ = 100

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.name = name
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, requires_grad={self.requires_grad})"

    def __len__(self):
        return len(self.data)

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

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, index):
        return getitem(self, index)

    @property
    def T(self):
        return transpose(self)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def sum(self, axis=None, keepdims=False):
        return reduce_sum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return reduce_mean(self, axis, keepdims)

    def backward(self):
        backward(self)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(data: np.ndarray, parents: Sequence[Tensor], grad_fn: Callable) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.name = None
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = grad_fn
    else:
        out.requires_grad = False
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, n in enumerate(shape):
        if n == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every ``requires_grad`` tensor feeding ``loss``.

    Leaf gradients accumulate across calls; optimizers clear them.
    """
    if loss.size != 1:
        raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        return

    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(loss, False)]
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

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward is None:
            node.grad = g if node.grad is None else node.grad + g
            continue
        node.grad = g
        for parent, pg in zip(node._parents, node._backward(g)):
            if pg is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = grads[key] + pg if key in grads else pg


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data + b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data - b.data, (a, b),
                   lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _record(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return _record(a.data * b.data, (a, b),
                   lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def grad_fn(g):
        return (_unbroadcast(g / b.data, a.shape),
                _unbroadcast(-g * a.data / (b.data * b.data), b.shape))

    return _record(a.data / b.data, (a, b), grad_fn)


def matmul(a, b) -> Tensor:
    """numpy ``matmul`` semantics, including leading batch broadcast."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 0 or b.ndim == 0:
        raise ValueError("matmul does not take scalars")
    if a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")

    def grad_fn(g):
        a2 = a.data[None, :] if a.ndim == 1 else a.data
        b2 = b.data[:, None] if b.ndim == 1 else b.data
        g2 = g
        if a.ndim == 1:
            g2 = g2[..., None, :]
        if b.ndim == 1:
            g2 = g2[..., None]
        ga = g2 @ np.swapaxes(b2, -1, -2)
        gb = np.swapaxes(a2, -1, -2) @ g2
        if a.ndim == 1:
            ga = ga[..., 0, :]
        if b.ndim == 1:
            gb = gb[..., 0]
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return _record(a.data @ b.data, (a, b), grad_fn)


def transpose(a, axes=None) -> Tensor:
    a = as_tensor(a)
    axes = tuple(reversed(range(a.ndim))) if axes is None else tuple(axes)
    inverse = tuple(np.argsort(axes))
    return _record(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def _is_basic(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return all(isinstance(i, (int, np.integer, slice)) or i is None or i is Ellipsis for i in items)


def getitem(a, index) -> Tensor:
    a = as_tensor(a)
    basic = _is_basic(index)

    def grad_fn(g):
        full = np.zeros_like(a.data)
        if basic:
            full[index] += g
        else:
            np.add.at(full, index, g)
        return (full,)

    return _record(a.data[index], (a,), grad_fn)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _record(np.concatenate([t.data for t in tensors], axis=axis), tensors,
                   lambda g: tuple(np.split(g, sizes, axis=axis)))


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]

    def grad_fn(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return _record(np.stack([t.data for t in tensors], axis=axis), tensors, grad_fn)


def reduce_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)

    def grad_fn(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _record(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), grad_fn)


def reduce_mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    count = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
    return reduce_sum(a, axis, keepdims) * (1.0 / count)


def reduce_max(a, axis=None, keepdims: bool = False) -> Tensor:
    """Maximum along one axis (or all). Gradient goes to the first argmax only."""
    a = as_tensor(a)
    if axis is None:
        flat = a.data.reshape(-1)
        idx = int(np.argmax(flat))
        out = flat[idx].reshape((1,) * a.ndim if keepdims else ())

        def grad_all(g):
            full = np.zeros(a.size)
            full[idx] = np.asarray(g).reshape(())
            return (full.reshape(a.shape),)

        return _record(out, (a,), grad_all)

    axis = axis % a.ndim
    idx = np.expand_dims(np.argmax(a.data, axis=axis), axis)
    out = np.take_along_axis(a.data, idx, axis)

    def grad_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        full = np.zeros_like(a.data)
        np.put_along_axis(full, idx, g, axis)
        return (full,)

    return _record(out if keepdims else np.squeeze(out, axis), (a,), grad_fn)


def pad(a, widths) -> Tensor:
    """Zero padding; ``widths`` as for ``np.pad``."""
    a = as_tensor(a)
    widths = [tuple(w) for w in widths]
    crop = tuple(slice(lo, lo + n) for (lo, _), n in zip(widths, a.shape))
    return _record(np.pad(a.data, widths), (a,), lambda g: (g[crop],))


def clip(a, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _record(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


def _unary(a, value: np.ndarray, local_grad: np.ndarray) -> Tensor:
    return _record(value, (a,), lambda g: (g * local_grad,))


def logistic(a) -> Tensor:
    a = as_tensor(a)
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    return _unary(a, y, y * (1.0 - y))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    y = np.tanh(a.data)
    return _unary(a, y, 1.0 - y * y)


def relu(a) -> Tensor:
    a = as_tensor(a)
    return _unary(a, np.maximum(a.data, 0.0), (a.data > 0).astype(np.float64))


def leaky_relu(a, alpha: float = 0.01) -> Tensor:
    a = as_tensor(a)
    pos = a.data > 0
    return _unary(a, np.where(pos, a.data, alpha * a.data), np.where(pos, 1.0, alpha))


def exp(a) -> Tensor:
    a = as_tensor(a)
    y = np.exp(a.data)
    return _unary(a, y, y)


def log(a) -> Tensor:
    a = as_tensor(a)
    return _unary(a, np.log(a.data), 1.0 / a.data)


def _windows(x: np.ndarray, H: int, W: int, stride) -> np.ndarray:
    sf, st = stride
    return sliding_window_view(x, (H, W), axis=(2, 3))[:, :, ::sf, ::st]


def _conv2d_grad_input(g: np.ndarray, w: np.ndarray, x_shape: tuple, stride) -> np.ndarray:
    H, W = w.shape[:2]
    sf, st = stride
    _, _, Fo, To = g.shape
    gx = np.zeros(x_shape)
    for i in range(H):
        for j in range(W):
            contrib = np.tensordot(g, w[i, j], axes=([1], [1]))  # (B, Fo, To, K)
            gx[:, :, i : i + sf * (Fo - 1) + 1 : sf, j : j + st * (To - 1) + 1 : st] += contrib.transpose(0, 3, 1, 2)
    return gx


def _conv2d_grad_kernel(g: np.ndarray, win: np.ndarray) -> np.ndarray:
    gk = np.tensordot(win, g, axes=([0, 2, 3], [0, 2, 3]))  # (K, H, W, J)
    return gk.transpose(1, 2, 0, 3)


def conv2d_raw(x, kernels, stride=(1, 1)) -> Tensor:
    """Valid cross-correlation of ``x`` (B, K, F, T) with ``kernels`` (H, W, K, J).

    Returns (B, J, F', T') with F' = (F - H) // stride_f + 1, likewise T'.
    """
    x, kernels = as_tensor(x), as_tensor(kernels)
    if x.ndim != 4 or kernels.ndim != 4:
        raise ValueError(f"conv2d_raw expects 4-D input and kernels, got {x.shape}, {kernels.shape}")
    H, W, K, J = kernels.shape
    if x.shape[1] != K:
        raise ValueError(f"input has {x.shape[1]} channels, kernels expect {K}")
    if x.shape[2] < H or x.shape[3] < W:
        raise ValueError(f"kernel {H}x{W} larger than input {x.shape[2]}x{x.shape[3]}")
    stride = tuple(int(s) for s in stride)
    win = _windows(x.data, H, W, stride)  # (B, K, F', T', H, W)
    out = np.tensordot(win, kernels.data, axes=([1, 4, 5], [2, 0, 1])).transpose(0, 3, 1, 2)

    def grad_fn(g):
        return (_conv2d_grad_input(g, kernels.data, x.shape, stride),
                _conv2d_grad_kernel(g, win))

    return _record(np.ascontiguousarray(out), (x, kernels), grad_fn)


def _central_difference(f, x: Tensor, h: float) -> np.ndarray:
    numeric = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    out = numeric.reshape(-1)
    with no_grad():
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = float(f(x).data)
            flat[i] = orig - h
            down = float(f(x).data)
            flat[i] = orig
            out[i] = (up - down) / (2 * h)
    return numeric


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-5) -> float:
    """Largest relative disagreement between backprop and central differences.

    ``f`` maps ``x`` to a scalar tensor. Per coordinate the error is
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)``.
    """
    x.requires_grad = True
    x.grad = None
    loss = f(x)
    backward(loss)
    analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()
    x.grad = None
    numeric = _central_difference(f, x, h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-8)
    return float(np.max(np.abs(analytic - numeric) / denom)) if x.size else 0.0
