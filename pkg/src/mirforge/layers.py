"""Dense, convolutional, pooling and recurrent layers built on ``tensor``.

Every layer takes a leading batch axis. Convolutional feature maps are laid
out (batch, channels, frequency, time); sequences are (batch, time, features).
"""

from __future__ import annotations

import math

import numpy as np

from . import tensor as tn
from .tensor import Tensor

__all__ = [
    "ACTIVATIONS",
    "activate",
    "softmax",
    "Dense",
    "Conv2d",
    "Conv1d",
    "maxpool",
    "global_avg_pool",
    "Recurrent",
]


def softmax(x, axis: int = -1) -> Tensor:
    x = tn.as_tensor(x)
    shift = np.max(x.data, axis=axis, keepdims=True)  # constant w.r.t. the graph
    e = tn.exp(x - shift)
    return e / tn.reduce_sum(e, axis=axis, keepdims=True)


ACTIVATIONS = {
    "linear": lambda x: x,
    "relu": tn.relu,
    "leaky_relu": tn.leaky_relu,
    "tanh": tn.tanh,
    "sigmoid": tn.logistic,
    "logistic": tn.logistic,
    "softmax": softmax,
}


def activate(kind: str, x: Tensor) -> Tensor:
    try:
        return ACTIVATIONS[kind](x)
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None


def _glorot(rng, shape, fan_in, fan_out):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Layer:
    def parameters(self) -> list[tuple[str, Tensor]]:
        return []

    def __call__(self, x, **kwargs):
        return self.forward(x, **kwargs)


class Dense(Layer):
    """``y = f(W x + b)`` applied along the last axis."""

    def __init__(self, v_in: int, v_out: int, activation: str = "linear", rng=None):
        rng = np.random.default_rng(rng)
        self.activation = activation
        self.W = Tensor(_glorot(rng, (v_out, v_in), v_in, v_out), requires_grad=True, name="W")
        self.b = Tensor(np.zeros(v_out), requires_grad=True, name="b")

    @property
    def v_in(self):
        return self.W.shape[1]

    @property
    def v_out(self):
        return self.W.shape[0]

    def parameters(self):
        return [("W", self.W), ("b", self.b)]

    def forward(self, x):
        x = tn.as_tensor(x)
        if x.shape[-1] != self.v_in:
            raise ValueError(f"dense layer expects width {self.v_in}, got {x.shape}")
        return activate(self.activation, tn.matmul(x, self.W.T) + self.b)


def _same_pad(n: int, k: int, s: int) -> tuple[int, int]:
    out = -(-n // s)
    total = max((out - 1) * s + k - n, 0)
    return total // 2, total - total // 2


class Conv2d(Layer):
    """Cross-correlation ``y^j = f(sum_k W^{jk} * x^k + b^j)``.

    ``kernels`` has shape (H, W, K, J): H along frequency, W along time.
    ``padding`` is ``"valid"``, ``"same"``, or a (freq, time) pair of those.
    """

    def __init__(self, k_in: int, j_out: int, kernel=(3, 3), stride=(1, 1), padding="valid",
                 activation: str = "relu", rng=None):
        rng = np.random.default_rng(rng)
        H, W = kernel
        if H < 1 or W < 1:
            raise ValueError(f"kernel extents must be positive, got {kernel}")
        if stride[0] > H or stride[1] > W or min(stride) < 1:
            raise ValueError(f"stride {stride} must lie in [1, kernel {kernel}]")
        self.stride = tuple(stride)
        self.padding = (padding, padding) if isinstance(padding, str) else tuple(padding)
        for p in self.padding:
            if p not in ("valid", "same"):
                raise ValueError(f"unknown padding {p!r}")
        self.activation = activation
        self.kernels = Tensor(_glorot(rng, (H, W, k_in, j_out), H * W * k_in, H * W * j_out),
                              requires_grad=True, name="kernels")
        self.bias = Tensor(np.zeros(j_out), requires_grad=True, name="bias")

    @property
    def kernel_size(self):
        return self.kernels.shape[:2]

    def parameters(self):
        return [("kernels", self.kernels), ("bias", self.bias)]

    def output_extent(self, F: int, T: int) -> tuple[int, int]:
        out = []
        for n, k, s, p in zip((F, T), self.kernel_size, self.stride, self.padding):
            if p == "same":
                out.append(-(-n // s))
            else:
                if n < k:
                    raise ValueError(f"kernel {self.kernel_size} larger than input {F}x{T}")
                out.append((n - k) // s + 1)
        return tuple(out)

    def forward(self, x):
        x = tn.as_tensor(x)
        single = x.ndim == 3
        if single:
            x = tn.reshape(x, (1,) + x.shape)
        _, _, F, T = x.shape
        self.output_extent(F, T)
        widths = [(0, 0), (0, 0)]
        for n, k, s, p in zip((F, T), self.kernel_size, self.stride, self.padding):
            widths.append(_same_pad(n, k, s) if p == "same" else (0, 0))
        if any(w != (0, 0) for w in widths):
            x = tn.pad(x, widths)
        y = tn.conv2d_raw(x, self.kernels, self.stride)
        y = activate(self.activation, y + tn.reshape(self.bias, (1, -1, 1, 1)))
        return tn.reshape(y, y.shape[1:]) if single else y


class Conv1d(Conv2d):
    """Convolution whose kernel spans the whole frequency axis (F x W kernels)."""

    def __init__(self, k_in: int, j_out: int, n_freq: int, width: int = 3, stride: int = 1,
                 padding: str = "same", activation: str = "relu", rng=None):
        super().__init__(k_in, j_out, (n_freq, width), (1, stride), ("valid", padding), activation, rng)

    def forward(self, x):
        F = tn.as_tensor(x).shape[-2]
        if F != self.kernel_size[0]:
            raise ValueError(f"conv1d kernel height {self.kernel_size[0]} must equal input F={F}")
        return super().forward(x)


def maxpool(x, pool) -> Tensor:
    """Non-overlapping max pooling over the last two axes (F, T)."""
    x = tn.as_tensor(x)
    pf, pt = pool
    *lead, F, T = x.shape
    if F % pf or T % pt:
        raise ValueError(f"pool {pool} does not divide feature map {F}x{T}")
    n = len(lead)
    y = tn.reshape(x, tuple(lead) + (F // pf, pf, T // pt, pt))
    axes = tuple(range(n)) + (n, n + 2, n + 1, n + 3)
    y = tn.reshape(tn.transpose(y, axes), tuple(lead) + (F // pf, T // pt, pf * pt))
    return tn.reduce_max(y, axis=-1)


def global_avg_pool(x) -> Tensor:
    """Mean over (F, T) per channel."""
    return tn.reduce_mean(tn.as_tensor(x), axis=(-2, -1))


class Recurrent(Layer):
    """Vanilla recurrence ``h_t = f_h(U x_t + W h_{t-1})``, ``y_t = f_out(V h_t)``.

    Bidirectional layers run a second (U, W) pair over reversed time and feed
    the concatenated states to V. In many-to-one mode only the final output is
    returned; for a bidirectional layer that uses the forward state at the last
    step and the backward state at the first step, both of which have seen the
    whole sequence.
    """

    def __init__(self, v_in: int, v_h: int, v_out: int, f_h: str = "tanh", f_out: str = "linear",
                 many_to_one: bool = False, bidirectional: bool = False, bias: bool = False, rng=None):
        rng = np.random.default_rng(rng)
        self.f_h, self.f_out = f_h, f_out
        self.many_to_one = many_to_one
        self.bidirectional = bidirectional
        dirs = 2 if bidirectional else 1
        rec = 1.0 / math.sqrt(v_h)

        def make(name, arr):
            return Tensor(arr, requires_grad=True, name=name)

        self.U = make("U", _glorot(rng, (v_h, v_in), v_in, v_h))
        self.W = make("W", rng.uniform(-rec, rec, size=(v_h, v_h)))
        if bidirectional:
            self.U_rev = make("U_rev", _glorot(rng, (v_h, v_in), v_in, v_h))
            self.W_rev = make("W_rev", rng.uniform(-rec, rec, size=(v_h, v_h)))
        self.V = make("V", _glorot(rng, (v_out, v_h * dirs), v_h * dirs, v_out))
        self.b_h = self.b_out = None
        if bias:
            self.b_h = make("b_h", np.zeros(v_h))
            if bidirectional:
                self.b_h_rev = make("b_h_rev", np.zeros(v_h))
            self.b_out = make("b_out", np.zeros(v_out))

    @property
    def v_h(self):
        return self.W.shape[0]

    @property
    def v_in(self):
        return self.U.shape[1]

    @property
    def v_out(self):
        return self.V.shape[0]

    def parameters(self):
        names = ["U", "W"] + (["U_rev", "W_rev"] if self.bidirectional else []) + ["V"]
        if self.b_out is not None:
            names += ["b_h"] + (["b_h_rev"] if self.bidirectional else []) + ["b_out"]
        return [(n, getattr(self, n)) for n in names]

    def _run(self, x, U, W, b, h0, reverse):
        T = x.shape[1]
        xu = tn.matmul(x, U.T)
        if b is not None:
            xu = xu + b
        h = h0
        states = [None] * T
        for t in (reversed(range(T)) if reverse else range(T)):
            h = activate(self.f_h, xu[:, t, :] + tn.matmul(h, W.T))
            states[t] = h
        return states

    def forward(self, x, h0=None):
        x = tn.as_tensor(x)
        single = x.ndim == 2
        if single:
            x = tn.reshape(x, (1,) + x.shape)
        B, T, V_in = x.shape
        if T == 0:
            raise ValueError("empty sequence")
        if V_in != self.v_in:
            raise ValueError(f"recurrent layer expects width {self.v_in}, got {V_in}")
        h0 = Tensor(np.zeros((B, self.v_h))) if h0 is None else tn.as_tensor(h0)
        if h0.ndim == 1:
            h0 = tn.reshape(h0, (1, -1)) + np.zeros((B, 1))

        fwd = self._run(x, self.U, self.W, self.b_h, h0, reverse=False)
        if self.bidirectional:
            bwd = self._run(x, self.U_rev, self.W_rev, getattr(self, "b_h_rev", None), h0, reverse=True)

        if self.many_to_one:
            h = tn.concat([fwd[-1], bwd[0]], axis=-1) if self.bidirectional else fwd[-1]
        else:
            h = tn.stack(fwd, axis=1)
            if self.bidirectional:
                h = tn.concat([h, tn.stack(bwd, axis=1)], axis=-1)
        y = tn.matmul(h, self.V.T)
        if self.b_out is not None:
            y = y + self.b_out
        y = activate(self.f_out, y)
        return tn.reshape(y, y.shape[1:]) if single else y
