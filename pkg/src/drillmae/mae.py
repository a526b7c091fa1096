"""Masked autoencoder: architecture from a design point, element-wise
random masking, and stage-1 self-supervised training.

The autoencoder is a symmetric stack of recurrent layers whose widths
interpolate linearly from the feature count down to the latent width
and back up (two bottleneck layers at the center), followed by a
time-distributed linear projection back to feature space. Pretraining
reconstructs the original window from a corrupted copy in which a fixed
fraction of scalar positions is zeroed; the reconstruction loss covers
all output positions, masked or not. Labels never enter this stage.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .nn import LayerSpec, ModelGraph, TrainConfig, TrainReport, train
from .seeding import derive_rng

__all__ = ["MaeConfig", "WidthSchedule", "MaskSample", "UnlabeledWindows",
           "width_schedule", "apply_mask", "build_autoencoder", "pretrain",
           "MaskedBatcher", "ENCODER_DEPTHS", "LATENT_PERCENTS", "HEADER_DEPTHS",
           "CELLS", "MASK_PERCENTS"]

# design-space domains (full factorial = 72 points)
_STREAM_MASK_SHUFFLE = 20
ENCODER_DEPTHS = (1, 2)
LATENT_PERCENTS = (0.2, 0.5, 0.8)
HEADER_DEPTHS = (1, 2)
CELLS = ("lstm", "gru")
MASK_PERCENTS = (0.2, 0.5, 0.8)


@dataclass(frozen=True)
class MaeConfig:
    """One point of the 5-dimensional design space."""

    encoder_depth: int
    latent_percent: float
    header_depth: int
    cell: str
    mask_percent: float

    def __post_init__(self):
        if self.encoder_depth not in ENCODER_DEPTHS:
            raise ValueError(f"encoder_depth must be in {ENCODER_DEPTHS}")
        if self.latent_percent not in LATENT_PERCENTS:
            raise ValueError(f"latent_percent must be in {LATENT_PERCENTS}")
        if self.header_depth not in HEADER_DEPTHS:
            raise ValueError(f"header_depth must be in {HEADER_DEPTHS}")
        if self.cell not in CELLS:
            raise ValueError(f"cell must be in {CELLS}")
        if self.mask_percent not in MASK_PERCENTS:
            raise ValueError(f"mask_percent must be in {MASK_PERCENTS}")

    @property
    def name(self) -> str:
        """Condensed label, e.g. ae1-lat80-hd2-gru-m20."""
        return (f"ae{self.encoder_depth}-lat{round(self.latent_percent * 100)}"
                f"-hd{self.header_depth}-{self.cell}-m{round(self.mask_percent * 100)}")

    @classmethod
    def from_name(cls, name: str) -> "MaeConfig":
        try:
            ae, lat, hd, cell, m = name.strip().split("-")
            return cls(int(ae.removeprefix("ae")),
                       int(lat.removeprefix("lat")) / 100.0,
                       int(hd.removeprefix("hd")),
                       cell.lower(),
                       int(m.removeprefix("m")) / 100.0)
        except (ValueError, AttributeError) as exc:
            raise ValueError(f"cannot parse config name {name!r}") from exc


def _round_half_away(x: float) -> int:
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


@dataclass(frozen=True)
class WidthSchedule:
    """Palindromic layer widths of the full autoencoder (length 2L)."""

    latent_width: int
    widths: tuple[int, ...]

    def __post_init__(self):
        w = self.widths
        if w != tuple(reversed(w)):
            raise ValueError("width schedule must be palindromic")
        mid = len(w) // 2
        if w[mid - 1] != self.latent_width or w[mid] != self.latent_width:
            raise ValueError("center entries must equal the latent width")


def width_schedule(n_features: int, cfg: MaeConfig) -> WidthSchedule:
    """Layer widths for the symmetric autoencoder.

    The latent width is round(F * latent_percent) with ties away from
    zero; interior encoder widths interpolate linearly between F and the
    latent width, rounded the same way. The decoder mirrors the encoder.
    """
    if n_features < 1:
        raise ValueError("n_features must be >= 1")
    d_z = _round_half_away(n_features * cfg.latent_percent)
    if d_z < 1:
        raise ValueError(
            f"latent width rounds to {d_z} for F={n_features}, "
            f"p_z={cfg.latent_percent}; bottleneck unusable")
    depth = cfg.encoder_depth
    interior = [_round_half_away(n_features + (d_z - n_features) * i / depth)
                for i in range(1, depth)]
    encoder = interior + [d_z]
    widths = tuple(encoder + encoder[::-1])
    return WidthSchedule(d_z, widths)


# -- masking ------------------------------------------------------------------

@dataclass(frozen=True)
class MaskSample:
    """The zeroed (time, feature) positions of one corrupted window."""

    positions: np.ndarray  # (n_mask, 2) int array of (t, f) pairs

    @property
    def n_mask(self) -> int:
        return len(self.positions)


def mask_count(t: int, f: int, mask_percent: float) -> int:
    return int(t * f * mask_percent)


def apply_mask(x: np.ndarray, mask_percent: float,
               rng: np.random.Generator) -> tuple[np.ndarray, MaskSample]:
    """Zero floor(T*F*p) distinct scalar positions, sampled uniformly
    without replacement; the original array is left untouched."""
    t, f = x.shape
    n = mask_count(t, f, mask_percent)
    flat = rng.choice(t * f, size=n, replace=False)
    corrupted = x.copy()
    corrupted.reshape(-1)[flat] = 0.0
    positions = np.column_stack(np.divmod(flat, f))
    return corrupted, MaskSample(positions)


def _mask_inplace(out: np.ndarray, x: np.ndarray, mask_percent: float,
                  rng: np.random.Generator) -> None:
    t, f = x.shape
    n = mask_count(t, f, mask_percent)
    out[...] = x
    out.reshape(-1)[rng.choice(t * f, size=n, replace=False)] = 0.0


# -- architecture ----------------------------------------------------------------

def build_autoencoder(cfg: MaeConfig, n_features: int, window_len: int,
                      seed: int, dtype=np.float32) -> ModelGraph:
    """Symmetric recurrent autoencoder with an output projection.

    2L recurrent layers per the width schedule, all emitting sequences,
    then a time-distributed linear projection back to the feature
    dimension; output shape equals input shape.
    """
    schedule = width_schedule(n_features, cfg)
    specs = [LayerSpec("recurrent", cell=cfg.cell, width=w, return_sequences=True)
             for w in schedule.widths]
    specs.append(LayerSpec("time_distributed_affine", width=n_features))
    return ModelGraph(specs, (window_len, n_features), seed=seed, dtype=dtype)


# -- stage-1 training --------------------------------------------------------------

@dataclass(frozen=True)
class UnlabeledWindows:
    """Input windows only; the pretraining data path carries no labels."""

    x: np.ndarray  # (N, T, F)

    def __post_init__(self):
        if self.x.ndim != 3:
            raise ValueError("unlabeled windows must be (N, T, F)")

    def __len__(self) -> int:
        return len(self.x)


class MaskedBatcher:
    """Reconstruction batches: (corrupted window, original window).

    Training masks are regenerated per window per epoch from the stream
    (seed, window index, epoch); validation masks use (seed, window
    index) once, so the early-stopping signal is stable across epochs.
    """

    def __init__(self, data: UnlabeledWindows, batch_size: int, seed: int,
                 mask_percent: float, fixed_masks: bool = False):
        if len(data) == 0:
            raise ValueError("empty pretraining source")
        self.x = data.x
        self.batch_size = batch_size
        self.seed = seed
        self.mask_percent = mask_percent
        self.fixed_masks = fixed_masks
        self._fixed_cache: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.x)

    def _corrupt(self, idx: np.ndarray, epoch: int) -> np.ndarray:
        out = np.empty((len(idx),) + self.x.shape[1:], dtype=self.x.dtype)
        for row, i in enumerate(idx):
            keys = (self.seed, int(i)) if self.fixed_masks else (self.seed, int(i), epoch)
            _mask_inplace(out[row], self.x[i], self.mask_percent, derive_rng(*keys))
        return out

    def batches(self, epoch: int) -> Iterator[tuple[np.ndarray, np.ndarray]]:
        n = len(self.x)
        if self.fixed_masks:
            if self._fixed_cache is None:
                self._fixed_cache = self._corrupt(np.arange(n), 0)
            for start in range(0, n, self.batch_size):
                sl = slice(start, start + self.batch_size)
                yield self._fixed_cache[sl], self.x[sl]
            return
        order = derive_rng(self.seed, _STREAM_MASK_SHUFFLE, epoch).permutation(n)
        for start in range(0, n, self.batch_size):
            idx = order[start:start + self.batch_size]
            yield self._corrupt(idx, epoch), self.x[idx]


def pretrain(autoencoder: ModelGraph, train_data: UnlabeledWindows,
             val_data: UnlabeledWindows, cfg: TrainConfig, mask_percent: float,
             seed: int) -> TrainReport:
    """Stage 1: masked reconstruction with early stopping on the fixed-mask
    validation reconstruction loss."""
    train_src = MaskedBatcher(train_data, cfg.batch_size, seed, mask_percent)
    val_src = MaskedBatcher(val_data, cfg.batch_size, seed, mask_percent,
                            fixed_masks=True)
    return train(autoencoder, train_src, val_src, cfg, seed=seed)
