"""Loss functions, the Adam optimizer, and the training loop.

Training is single-writer: one parameter set is updated in place, and the
best-validation snapshot is what gets returned. A "stream" here is a
callable mapping a 1-based epoch index to an iterable of batches, which
lets the data layer reshuffle per epoch while staying deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .dataset import Batch
from .errors import ConfigError, DivergenceError
from .unet import UNetParams, audit_shapes, backward, forward

MSE = "mean_squared_error"
BCE = "binary_cross_entropy"
_LOSS_ALIASES = {"mse": MSE, MSE: MSE, "bce": BCE, BCE: BCE}


def canonical_loss(kind: str) -> str:
    try:
        return _LOSS_ALIASES[kind]
    except KeyError:
        raise ConfigError(f"unknown loss {kind!r}") from None


def loss_value(pred: np.ndarray, target: np.ndarray, kind: str = MSE) -> float:
    """Mean over all pixels and batch entries."""
    kind = canonical_loss(kind)
    pred = np.asarray(pred)
    target = np.asarray(target)
    if kind == MSE:
        diff = pred.astype(np.float64) - target.astype(np.float64)
        return float(np.mean(diff * diff))
    eps = 1e-7 if pred.dtype == np.float32 else 1e-12
    p = np.clip(pred.astype(np.float64), eps, 1.0 - eps)
    t = target.astype(np.float64)
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log1p(-p))))


def loss_grad(pred: np.ndarray, target: np.ndarray, kind: str = MSE) -> np.ndarray:
    """d(mean loss)/d(pred), in pred's dtype."""
    kind = canonical_loss(kind)
    n = pred.size
    if kind == MSE:
        return (2.0 / n) * (pred - target)
    eps = 1e-7 if pred.dtype == np.float32 else 1e-12
    p = np.clip(pred, eps, 1.0 - eps)
    return ((p - target) / (p * (1.0 - p))) / n


@dataclass
class TrainConfig:
    loss: str = MSE
    learning_rate: float = 1e-3
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    validation_fraction: float = 0.1
    rng_seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    stop_at_train_loss: float | None = None  # optional early exit for sanity runs

    def __post_init__(self):
        self.loss = canonical_loss(self.loss)

    def to_dict(self) -> dict:
        return {
            "loss": self.loss,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "patience": self.patience,
            "validation_fraction": self.validation_fraction,
            "rng_seed": self.rng_seed,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
            "stop_at_train_loss": self.stop_at_train_loss,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown training config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_loss: float


@dataclass
class TrainReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    selected_epoch: int = 0
    stopped: str = "max_epochs"  # or "patience" or "target"

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "selected_epoch": self.selected_epoch,
            "stopped": self.stopped,
            "epochs": [
                {"epoch": r.epoch, "train_loss": r.train_loss, "val_loss": r.val_loss}
                for r in self.epochs
            ],
        }


class Adam:
    """Adaptive-moment gradient descent with bias correction."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 epsilon: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, arrays: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, p in arrays.items():
            g = grads[name]
            if name not in self.m:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= (self.lr / bc1) * m / (np.sqrt(v / bc2) + self.epsilon)


def array_stream(inputs: np.ndarray, targets: np.ndarray, batch_size: int,
                 seed: int | None = None):
    """Stream over in-memory arrays; shuffled per epoch when seed is given."""
    n = inputs.shape[0]
    chip_ids = [f"mem-{i:04d}" for i in range(n)]

    def stream(epoch: int):
        if seed is None:
            order = np.arange(n)
        else:
            order = np.random.default_rng(
                np.random.SeedSequence([seed, epoch])
            ).permutation(n)
        for start in range(0, n, batch_size):
            pick = order[start : start + batch_size]
            yield Batch(inputs[pick], targets[pick], [chip_ids[i] for i in pick])

    return stream


def _stream_loss(params: UNetParams, stream, epoch: int, kind: str) -> float | None:
    total = 0.0
    count = 0
    for batch in stream(epoch):
        pred = forward(params, batch.inputs)
        total += loss_value(pred, batch.targets, kind) * batch.inputs.shape[0]
        count += batch.inputs.shape[0]
    return total / count if count else None


def train(params: UNetParams, train_stream, val_stream,
          tc: TrainConfig) -> tuple[UNetParams, TrainReport]:
    """Gradient steps on tc.loss; returns the best-validation snapshot.

    Stops at max_epochs, when validation loss has not improved for more
    than `patience` epochs, or when an optional train-loss target is hit.
    When the validation stream is empty, selection falls back to the
    training loss.
    """
    audit_shapes(params)
    opt = Adam(tc.learning_rate, tc.beta1, tc.beta2, tc.epsilon)
    report = TrainReport()
    best_arrays = {k: v.copy() for k, v in params.arrays.items()}
    best_loss = math.inf
    epochs_since_best = 0

    for epoch in range(1, tc.max_epochs + 1):
        total = 0.0
        count = 0
        for batch in train_stream(epoch):
            cache: dict = {}
            pred = forward(params, batch.inputs, cache=cache)
            batch_loss = loss_value(pred, batch.targets, tc.loss)
            if not math.isfinite(batch_loss):
                raise DivergenceError(f"non-finite training loss at epoch {epoch}")
            dy = loss_grad(pred, batch.targets, tc.loss)
            grads = backward(params, cache, dy)
            opt.step(params.arrays, grads)
            total += batch_loss * batch.inputs.shape[0]
            count += batch.inputs.shape[0]
        if count == 0:
            raise DivergenceError(f"empty training stream at epoch {epoch}")
        train_loss = total / count

        val_loss = _stream_loss(params, val_stream, epoch, tc.loss)
        selection_loss = train_loss if val_loss is None else val_loss
        if not math.isfinite(selection_loss):
            raise DivergenceError(f"non-finite validation loss at epoch {epoch}")
        report.epochs.append(
            EpochRecord(epoch, train_loss, selection_loss if val_loss is None else val_loss)
        )

        if selection_loss < best_loss:
            best_loss = selection_loss
            best_arrays = {k: v.copy() for k, v in params.arrays.items()}
            report.selected_epoch = epoch
            epochs_since_best = 0
        else:
            epochs_since_best += 1

        if tc.stop_at_train_loss is not None and train_loss < tc.stop_at_train_loss:
            report.stopped = "target"
            break
        if epochs_since_best > tc.patience:
            report.stopped = "patience"
            break
    else:
        report.stopped = "max_epochs"

    return UNetParams(params.config, best_arrays), report
