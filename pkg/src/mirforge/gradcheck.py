"""Finite-difference verification of every layer kind and loss."""

from __future__ import annotations

import numpy as np

from . import tensor as tn
from .layers import Conv1d, Conv2d, Dense, Recurrent, global_avg_pool, maxpool, softmax
from .tensor import Tensor, grad_check
from .train import loss_binary_xent, loss_categorical_xent, loss_mse

TOLERANCE = 1e-4


def _projection(rng, shape):
    return rng.standard_normal(shape)


def check_layer(layer, x: np.ndarray, seed: int = 0, h: float = 1e-5) -> dict[str, float]:
    """Max relative error for the layer input and each parameter under ``sum(R * layer(x))``."""
    rng = np.random.default_rng(seed)
    with tn.no_grad():
        out_shape = layer(Tensor(x)).shape
    weights = _projection(rng, out_shape)
    errors = {}

    xt = Tensor(x.copy())
    errors["input"] = grad_check(lambda v: tn.reduce_sum(layer(v) * weights), xt, h)
    for name, p in layer.parameters():
        errors[name] = grad_check(lambda _: tn.reduce_sum(layer(Tensor(x)) * weights), p, h)
        p.grad = None
    return errors


def check_function(fn, x: np.ndarray, seed: int = 0, h: float = 1e-5) -> dict[str, float]:
    rng = np.random.default_rng(seed)
    with tn.no_grad():
        weights = _projection(rng, fn(Tensor(x)).shape)
    return {"input": grad_check(lambda v: tn.reduce_sum(fn(v) * weights), Tensor(x.copy()), h)}


def _components(seed: int):
    rng = np.random.default_rng(seed)

    def dense():
        return check_layer(Dense(7, 5, "tanh", rng), rng.standard_normal((3, 7)), seed)

    def conv2d():
        layer = Conv2d(2, 4, (3, 3), (1, 1), "same", "tanh", rng)
        return check_layer(layer, rng.standard_normal((2, 2, 6, 8)), seed)

    def conv2d_strided():
        layer = Conv2d(2, 4, (3, 3), (2, 2), "valid", "tanh", rng)
        return check_layer(layer, rng.standard_normal((2, 2, 6, 8)), seed)

    def conv1d():
        layer = Conv1d(2, 4, 6, 3, 1, "same", "tanh", rng)
        return check_layer(layer, rng.standard_normal((2, 2, 6, 8)), seed)

    def pool():
        return check_function(lambda v: maxpool(v, (2, 2)), rng.standard_normal((2, 4, 6, 8)), seed)

    def gpool():
        return check_function(global_avg_pool, rng.standard_normal((2, 4, 6, 8)), seed)

    def rnn():
        layer = Recurrent(3, 4, 2, "tanh", "linear", rng=rng)
        return check_layer(layer, rng.standard_normal((2, 5, 3)), seed)

    def birnn():
        layer = Recurrent(3, 4, 2, "tanh", "linear", bidirectional=True, rng=rng)
        return check_layer(layer, rng.standard_normal((2, 5, 3)), seed)

    def rnn_many_to_one():
        layer = Recurrent(3, 4, 2, "tanh", "linear", many_to_one=True, bias=True, rng=rng)
        return check_layer(layer, rng.standard_normal((2, 5, 3)), seed)

    def categorical():
        target = np.eye(5)[rng.integers(0, 5, 4)]
        logits = rng.standard_normal((4, 5))
        return {"input": grad_check(lambda v: loss_categorical_xent(softmax(v), target), Tensor(logits))}

    def binary():
        target = rng.integers(0, 2, (4, 3)).astype(float)
        logits = rng.standard_normal((4, 3))
        return {"input": grad_check(lambda v: loss_binary_xent(tn.logistic(v), target), Tensor(logits))}

    def mse():
        target = rng.standard_normal((4, 3))
        return {"input": grad_check(lambda v: loss_mse(v, target), Tensor(rng.standard_normal((4, 3))))}

    return {
        "dense": dense,
        "conv1d": conv1d,
        "conv2d": conv2d,
        "conv2d-strided": conv2d_strided,
        "maxpool": pool,
        "global-pool": gpool,
        "rnn": rnn,
        "rnn-many-to-one": rnn_many_to_one,
        "bi-rnn": birnn,
        "loss-categorical-xent": categorical,
        "loss-binary-xent": binary,
        "loss-mse": mse,
    }


def run_suite(seed: int = 0) -> dict[str, float]:
    """Component name -> worst relative error over its input and parameters."""
    return {name: max(fn().values()) for name, fn in _components(seed).items()}
