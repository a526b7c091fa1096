"""Training loop: minibatches, early stopping, best-weight restore,
immediate termination on non-finite loss."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from ..seeding import derive_rng
from .graph import ModelGraph
from .losses import mae_loss
from .optim import AdamState, NonFiniteGradientError, adam_step

__all__ = ["TrainConfig", "TrainReport", "ArrayBatcher", "train",
           "evaluate_loss", "predict"]

# stream tags for rng derivation inside a run
_STREAM_SHUFFLE = 1
_STREAM_DROPOUT = 2


@dataclass(frozen=True)
class TrainConfig:
    """Optimization settings shared by every training stage."""

    learning_rate: float = 0.001
    batch_size: int = 64
    max_epochs: int = 15
    patience: int = 5
    clip_norm: float = 1.0
    loss: str = "mae"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be >= 1")
        if self.clip_norm <= 0:
            raise ValueError("clip_norm must be positive")
        if self.loss != "mae":
            raise ValueError(f"unsupported loss {self.loss!r}")


@dataclass
class TrainReport:
    """Per-epoch record of one training run."""

    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    best_epoch: int = 0
    best_val_loss: float = math.inf
    epochs_run: int = 0
    stopped_early: bool = False
    nan_terminated: bool = False
    restored: bool = False

    def save_epochs(self, path) -> None:
        """Write the epoch table as delimited text."""
        lines = ["epoch,train_loss,val_loss"]
        for i, tl in enumerate(self.train_losses):
            vl = self.val_losses[i] if i < len(self.val_losses) else float("nan")
            lines.append(f"{i + 1},{tl!r},{vl!r}")
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")


class ArrayBatcher:
    """Minibatches over in-memory arrays.

    Shuffling is re-seeded per epoch from (seed, stream, epoch), so batch
    membership is reproducible and independent of consumption order. The
    final short batch is kept.
    """

    def __init__(self, x: np.ndarray, y: np.ndarray, batch_size: int,
                 seed: int = 0, shuffle: bool = True):
        if len(x) != len(y):
            raise ValueError("inputs and targets differ in length")
        if len(x) == 0:
            raise ValueError("empty batch source")
        self.x = x
        self.y = y
        self.batch_size = batch_size
        self.seed = seed
        self.shuffle = shuffle

    def __len__(self) -> int:
        return len(self.x)

    def batches(self, epoch: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        n = len(self.x)
        if self.shuffle:
            order = derive_rng(self.seed, _STREAM_SHUFFLE, epoch).permutation(n)
        else:
            order = np.arange(n)
        for start in range(0, n, self.batch_size):
            idx = order[start:start + self.batch_size]
            yield self.x[idx], self.y[idx]


def evaluate_loss(graph: ModelGraph, source, epoch: int = 0) -> float:
    """Element-weighted mean loss over a batch source, inference mode."""
    total = 0.0
    count = 0
    for x, y in source.batches(epoch):
        pred = graph.forward(x, train=False)
        loss, _ = mae_loss(pred, y.astype(graph.dtype, copy=False))
        total += loss * pred.size
        count += pred.size
    if count == 0:
        raise ValueError("empty evaluation source")
    return total / count


def predict(graph: ModelGraph, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    """Inference-mode forward over ``x`` in batches, outputs stacked."""
    outs = [graph.forward(x[i:i + batch_size], train=False)
            for i in range(0, len(x), batch_size)]
    return np.concatenate(outs, axis=0)


def train(graph: ModelGraph, train_source, val_source, cfg: TrainConfig,
          seed: int = 0) -> TrainReport:
    """Fit ``graph`` with Adam + clipping, early stopping on validation loss.

    Stops when validation loss has not improved for ``cfg.patience``
    consecutive epochs or when ``cfg.max_epochs`` is reached; parameters
    are restored to the best-validation snapshot either way. A non-finite
    training or validation loss (or gradient) terminates immediately with
    ``nan_terminated`` set and the last good snapshot restored.
    """
    report = TrainReport()
    state = AdamState()
    drop_rng = derive_rng(seed, _STREAM_DROPOUT)
    params, grads = graph.trainable_arrays()

    best_state = graph.get_state()
    wait = 0
    for epoch in range(1, cfg.max_epochs + 1):
        report.epochs_run = epoch
        total = 0.0
        count = 0
        for x, y in train_source.batches(epoch):
            pred = graph.forward(x, train=True, rng=drop_rng)
            loss, grad = mae_loss(pred, y.astype(graph.dtype, copy=False))
            if not math.isfinite(loss):
                report.nan_terminated = True
                break
            graph.backward(grad)
            try:
                adam_step(params, grads, state, cfg.learning_rate, cfg.clip_norm)
            except NonFiniteGradientError:
                report.nan_terminated = True
                break
            total += loss * pred.size
            count += pred.size
        if report.nan_terminated:
            break
        report.train_losses.append(total / max(count, 1))

        val_loss = evaluate_loss(graph, val_source)
        if not math.isfinite(val_loss):
            report.nan_terminated = True
            break
        report.val_losses.append(val_loss)

        if val_loss < report.best_val_loss:
            report.best_val_loss = val_loss
            report.best_epoch = epoch
            best_state = graph.get_state()
            wait = 0
        else:
            wait += 1
            if wait >= cfg.patience:
                report.stopped_early = True
                break

    graph.set_state(best_state)
    report.restored = report.best_epoch < report.epochs_run or report.nan_terminated
    if report.best_epoch == 0:
        # nothing ever improved on +inf (only possible via NaN in epoch 1):
        # the initial parameters are the snapshot
        report.best_val_loss = float("nan")
    return report
