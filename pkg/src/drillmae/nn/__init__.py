"""Self-contained recurrent network engine (numpy forward/backward)."""

from .graph import LayerSpec, ModelGraph
from .layers import Affine, Dropout, Recurrent, TimeDistributedAffine
from .losses import mae_loss, mae_metric, rmse_metric
from .optim import (ADAM_BETA1, ADAM_BETA2, ADAM_EPS, AdamState,
                    NonFiniteGradientError, adam_step, clip_global_norm)
from .snapshot import load_into, load_snapshot, save_snapshot
from .train import (ArrayBatcher, TrainConfig, TrainReport, evaluate_loss,
                    predict, train)

__all__ = [
    "LayerSpec", "ModelGraph",
    "Affine", "Dropout", "Recurrent", "TimeDistributedAffine",
    "mae_loss", "mae_metric", "rmse_metric",
    "AdamState", "adam_step", "clip_global_norm", "NonFiniteGradientError",
    "ADAM_BETA1", "ADAM_BETA2", "ADAM_EPS",
    "save_snapshot", "load_snapshot", "load_into",
    "ArrayBatcher", "TrainConfig", "TrainReport", "train", "evaluate_loss", "predict",
]
