"""Stage 2: frozen-encoder transfer, plus the fully supervised baselines.

The encoder is the first half of a trained autoencoder's recurrent
stack, reconfigured to emit a single context vector and frozen. A small
trainable header (1-2 recurrent layers of the same cell, then a scalar
linear output) is appended; the context vector is presented to the
first header layer as a length-1 sequence. Baselines are two-layer
64-unit recurrent regressors with dropout, trained end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import (LayerSpec, ModelGraph, TrainConfig, TrainReport, ArrayBatcher,
                 mae_metric, predict, rmse_metric, train)

__all__ = ["EncoderHandle", "TaskHeadSpec", "extract_encoder",
           "build_finetune_model", "finetune", "build_baseline",
           "evaluate_regression", "BASELINE_WIDTH", "BASELINE_DROPOUT"]

BASELINE_WIDTH = 64
BASELINE_DROPOUT = 0.3


@dataclass
class EncoderHandle:
    """Frozen copy of a pretrained encoder.

    The layer specs are the first L recurrent layers with the last one
    switched to final-state output and every layer marked non-trainable;
    ``params`` holds the stage-1 weights keyed by (encoder layer index,
    parameter name).
    """

    specs: list[LayerSpec]
    params: dict[tuple[int, str], np.ndarray]
    input_shape: tuple[int, int]
    cell: str

    @property
    def depth(self) -> int:
        return len(self.specs)

    @property
    def context_width(self) -> int:
        return self.specs[-1].width


def extract_encoder(autoencoder: ModelGraph, depth: int) -> EncoderHandle:
    """Copy the first ``depth`` recurrent layers of a trained autoencoder.

    The autoencoder must consist of exactly 2*depth recurrent layers
    plus the output projection.
    """
    rec_specs = [s for s in autoencoder.specs if s.kind == "recurrent"]
    if len(rec_specs) != 2 * depth:
        raise ValueError(
            f"autoencoder has {len(rec_specs)} recurrent layers, expected {2 * depth}")
    if autoencoder.specs[-1].kind != "time_distributed_affine":
        raise ValueError("autoencoder must end with an output projection")

    specs: list[LayerSpec] = []
    for i, spec in enumerate(rec_specs[:depth]):
        last = i == depth - 1
        specs.append(LayerSpec("recurrent", cell=spec.cell, width=spec.width,
                               return_sequences=not last, trainable=False))
    params = {}
    for layer_idx, name, arr in autoencoder.parameters():
        if layer_idx < depth:
            params[(layer_idx, name)] = arr.copy()
    return EncoderHandle(specs, params, autoencoder.input_shape, rec_specs[0].cell)


@dataclass(frozen=True)
class TaskHeadSpec:
    """Trainable regression header appended to a frozen encoder."""

    depth: int
    cell: str

    def __post_init__(self):
        if self.depth not in (1, 2):
            raise ValueError("header depth must be 1 or 2")
        if self.cell not in ("lstm", "gru"):
            raise ValueError("header cell must be lstm or gru")


def build_finetune_model(encoder: EncoderHandle, head: TaskHeadSpec,
                         seed: int, dtype=np.float32) -> ModelGraph:
    """Frozen encoder + trainable header, scalar output.

    Header recurrent layers consume the encoder's context vector as a
    length-1 sequence; only header parameters are trainable.
    """
    if head.cell != encoder.cell:
        raise ValueError(f"header cell {head.cell!r} must match encoder cell "
                         f"{encoder.cell!r}")
    specs = list(encoder.specs)
    width = encoder.context_width
    for i in range(head.depth):
        last = i == head.depth - 1
        specs.append(LayerSpec("recurrent", cell=head.cell, width=width,
                               return_sequences=not last))
    specs.append(LayerSpec("affine", width=1))
    graph = ModelGraph(specs, encoder.input_shape, seed=seed, dtype=dtype)
    for (layer_idx, name), arr in encoder.params.items():
        graph.layers[layer_idx].params[name][...] = arr.astype(graph.dtype)
    return graph


def finetune(model: ModelGraph, train_x: np.ndarray, train_y: np.ndarray,
             val_x: np.ndarray, val_y: np.ndarray, cfg: TrainConfig,
             seed: int) -> TrainReport:
    """Supervised fine-tuning on labeled windows (early stopping on
    validation MAE); the frozen encoder is untouched by construction."""
    train_src = ArrayBatcher(train_x, train_y, cfg.batch_size, seed=seed)
    val_src = ArrayBatcher(val_x, val_y, cfg.batch_size, shuffle=False)
    return train(model, train_src, val_src, cfg, seed=seed)


def build_baseline(cell: str, window_len: int, n_features: int, seed: int,
                   dtype=np.float32) -> ModelGraph:
    """Supervised reference model: recurrent(64, sequences) -> dropout(0.3)
    -> recurrent(64, final state) -> affine(1); all trainable."""
    if cell not in ("lstm", "gru"):
        raise ValueError("baseline cell must be lstm or gru")
    specs = [
        LayerSpec("recurrent", cell=cell, width=BASELINE_WIDTH, return_sequences=True),
        LayerSpec("dropout", rate=BASELINE_DROPOUT),
        LayerSpec("recurrent", cell=cell, width=BASELINE_WIDTH),
        LayerSpec("affine", width=1),
    ]
    return ModelGraph(specs, (window_len, n_features), seed=seed, dtype=dtype)


def evaluate_regression(model: ModelGraph, x: np.ndarray,
                        y: np.ndarray) -> tuple[float, float]:
    """(MAE, RMSE) of the model's predictions on one split."""
    pred = predict(model, x)
    return mae_metric(y, pred), rmse_metric(y, pred)
