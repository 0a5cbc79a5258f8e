"""Losses, optimizers and the seeded training loop."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as tn
from .tensor import Tensor

__all__ = [
    "PROB_CLIP",
    "TrainConfig",
    "History",
    "DivergenceError",
    "loss_categorical_xent",
    "loss_binary_xent",
    "loss_mse",
    "LOSSES",
    "SGD",
    "Adam",
    "sgd_step",
    "adam_step",
    "accuracy",
    "train",
    "evaluate",
]

PROB_CLIP = 1e-7


class DivergenceError(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"loss became {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


def _check_shapes(pred: Tensor, target: np.ndarray):
    if pred.shape != target.shape:
        raise ValueError(f"prediction shape {pred.shape} does not match target {target.shape}")


def loss_categorical_xent(pred, target) -> Tensor:
    """Batch mean of ``-sum(target * log(pred))`` over the last axis."""
    pred = tn.as_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    _check_shapes(pred, target)
    p = tn.clip(pred, PROB_CLIP, 1.0 - PROB_CLIP)
    per_sample = -tn.reduce_sum(tn.log(p) * target, axis=-1)
    return tn.reduce_mean(per_sample)


def loss_binary_xent(pred, target) -> Tensor:
    """Mean over every output of ``-[t log p + (1 - t) log(1 - p)]``."""
    pred = tn.as_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    _check_shapes(pred, target)
    if not np.all((target == 0) | (target == 1)):
        raise ValueError("binary cross-entropy targets must be 0 or 1")
    p = tn.clip(pred, PROB_CLIP, 1.0 - PROB_CLIP)
    terms = tn.log(p) * target + tn.log(1.0 - p) * (1.0 - target)
    return -tn.reduce_mean(terms)


def loss_mse(pred, target) -> Tensor:
    pred = tn.as_tensor(pred)
    target = np.asarray(target, dtype=np.float64)
    _check_shapes(pred, target)
    diff = pred - target
    return tn.reduce_mean(diff * diff)


LOSSES = {
    "categorical-xent": loss_categorical_xent,
    "binary-xent": loss_binary_xent,
    "mse": loss_mse,
}


def _require_grads(params):
    for p in params:
        if p.grad is None:
            raise RuntimeError(f"parameter {p.name or p.shape} has no gradient; run backward first")


def sgd_step(params, lr: float) -> None:
    """``w := w - lr * grad`` in place, then clear the gradients."""
    _require_grads(params)
    for p in params:
        p.data -= lr * p.grad
        p.grad = None


def adam_step(params, state: dict, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """Bias-corrected Adam update. ``state`` holds ``t``, ``m`` and ``v`` lists."""
    _require_grads(params)
    if not state:
        state.update(t=0, m=[np.zeros_like(p.data) for p in params],
                     v=[np.zeros_like(p.data) for p in params])
    state["t"] += 1
    t = state["t"]
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for p, m, v in zip(params, state["m"], state["v"]):
        g = p.grad
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
        p.grad = None


class SGD:
    def __init__(self, params, lr: float):
        self.params = list(params)
        self.lr = lr

    def step(self):
        sgd_step(self.params, self.lr)


class Adam:
    def __init__(self, params, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.state: dict = {}

    def step(self):
        adam_step(self.params, self.state, self.lr, self.beta1, self.beta2, self.eps)


OPTIMIZERS = {"sgd": SGD, "adam": Adam}


@dataclass
class TrainConfig:
    loss: str = "binary-xent"
    optimizer: str = "sgd"
    lr: float = 0.01
    epochs: int = 50
    batch_size: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not self.lr >= 0:
            raise ValueError("learning rate must be non-negative")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")


@dataclass
class History:
    rows: list[dict] = field(default_factory=list)
    params: list[np.ndarray] = field(default_factory=list)

    FIELDS = ("epoch", "train_loss", "train_metric", "val_loss", "val_metric")

    @property
    def train_loss(self):
        return [r["train_loss"] for r in self.rows]

    @property
    def final(self) -> dict:
        return self.rows[-1]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.FIELDS)
            for r in self.rows:
                writer.writerow([r["epoch"]] + [repr(r[k]) if r[k] is not None else "" for k in self.FIELDS[1:]])


def accuracy(pred: np.ndarray, target: np.ndarray) -> float:
    """Argmax agreement for multi-output targets, 0.5-threshold for single outputs.

    Sequence outputs (B, T, C) are scored per frame.
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if target.shape[-1] == 1:
        return float(np.mean((pred > 0.5) == (target > 0.5)))
    return float(np.mean(np.argmax(pred, axis=-1) == np.argmax(target, axis=-1)))


def evaluate(model, x, y, loss: str, batch_size: int = 64) -> tuple[float, float]:
    """(loss, accuracy) over a dataset without recording a graph."""
    preds = []
    with tn.no_grad():
        for i in range(0, len(x), batch_size):
            preds.append(model(x[i : i + batch_size]).data)
    pred = np.concatenate(preds)
    with tn.no_grad():
        value = LOSSES[loss](Tensor(pred), y).item()
    return value, accuracy(pred, y)


def train(model, data, cfg: TrainConfig, val=None) -> History:
    """Minibatch training, deterministic given ``cfg.seed``.

    ``data`` and ``val`` are (inputs, targets) array pairs. The model is
    updated in place; the history's ``params`` holds final parameter copies.
    Raises ``DivergenceError`` when a batch loss is NaN or infinite.
    """
    x, y = data
    if len(x) == 0:
        raise ValueError("empty training set")
    if len(x) != len(y):
        raise ValueError(f"{len(x)} inputs but {len(y)} targets")
    params = [p for _, p in model.parameters()]
    for p in params:
        p.grad = None
    opt = OPTIMIZERS[cfg.optimizer](params, lr=cfg.lr)
    loss_fn = LOSSES[cfg.loss]
    history = History()

    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.seed, epoch]).permutation(len(x))
        total, preds = 0.0, np.empty((len(x),) + y.shape[1:])
        for start in range(0, len(x), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            out = model(x[idx])
            loss = loss_fn(out, y[idx])
            value = loss.item()
            if not math.isfinite(value):
                raise DivergenceError(epoch, value)
            tn.backward(loss)
            opt.step()
            total += value * len(idx)
            preds[idx] = out.data
        row = {"epoch": epoch, "train_loss": total / len(x), "train_metric": accuracy(preds, y),
               "val_loss": None, "val_metric": None}
        if val is not None:
            row["val_loss"], row["val_metric"] = evaluate(model, val[0], val[1], cfg.loss)
        history.rows.append(row)
    history.params = [p.data.copy() for p in params]
    return history
