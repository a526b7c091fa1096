"""Model graph: an ordered layer stack with a shared forward/backward API.

A graph is described by a list of :class:`LayerSpec` plus an input shape
(without the batch dimension). Construction instantiates layers, threads
shape inference through the stack and seeds parameter initialization.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .layers import Affine, Dropout, Layer, Recurrent, TimeDistributedAffine

__all__ = ["LayerSpec", "ModelGraph"]

_KINDS = ("recurrent", "affine", "time_distributed_affine", "dropout")


@dataclass(frozen=True)
class LayerSpec:
    """Declarative description of one layer.

    kind: one of recurrent | affine | time_distributed_affine | dropout.
    cell: "lstm" or "gru", recurrent layers only.
    width: output units (ignored for dropout).
    return_sequences: recurrent layers only.
    rate: dropout probability, dropout layers only.
    trainable: frozen layers propagate gradients but receive no updates.
    """

    kind: str
    cell: str | None = None
    width: int | None = None
    return_sequences: bool = False
    rate: float = 0.0
    trainable: bool = True

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")
        if self.kind == "recurrent":
            if self.cell not in ("lstm", "gru"):
                raise ValueError(f"recurrent layer needs cell lstm|gru, got {self.cell!r}")
            if self.width is None or self.width < 1:
                raise ValueError("recurrent layer needs width >= 1")
        elif self.kind in ("affine", "time_distributed_affine"):
            if self.width is None or self.width < 1:
                raise ValueError(f"{self.kind} layer needs width >= 1")
        elif self.kind == "dropout":
            if not 0.0 <= self.rate < 1.0:
                raise ValueError("dropout rate must be in [0, 1)")


def _make_layer(spec: LayerSpec) -> Layer:
    if spec.kind == "recurrent":
        return Recurrent(spec.cell, spec.width, spec.return_sequences, spec.trainable)
    if spec.kind == "affine":
        return Affine(spec.width, spec.trainable)
    if spec.kind == "time_distributed_affine":
        return TimeDistributedAffine(spec.width, spec.trainable)
    return Dropout(spec.rate)


class ModelGraph:
    """Sequential stack of layers with BPTT gradients.

    Parameters are keyed by (layer index, parameter name). ``forward`` in
    train mode caches activations; ``backward`` consumes them and fills
    gradient buffers for every trainable layer.
    """

    def __init__(self, specs: list[LayerSpec], input_shape: tuple[int, ...],
                 seed: int, dtype=np.float32):
        if not specs:
            raise ValueError("graph needs at least one layer")
        self.specs = list(specs)
        self.input_shape = tuple(input_shape)
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        self.layers: list[Layer] = []
        shape = self.input_shape
        for spec in self.specs:
            layer = _make_layer(spec)
            shape = layer.build(shape, rng, self.dtype)
            self.layers.append(layer)
        self.output_shape = shape
        self._forward_ready = False

    # -- execution ------------------------------------------------------

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None,
                capture: list[np.ndarray] | None = None) -> np.ndarray:
        """Run the stack on a batch.

        ``capture``, when given, is filled with each layer's output
        (useful for comparing intermediate activations between graphs).
        """
        if x.shape[1:] != self.input_shape:
            raise ValueError(
                f"input shape {x.shape[1:]} does not match graph input "
                f"{self.input_shape}")
        out = np.asarray(x, dtype=self.dtype)
        for layer in self.layers:
            out = layer.forward(out, train=train, rng=rng)
            if capture is not None:
                capture.append(out)
        self._forward_ready = train
        return out

    def backward(self, grad: np.ndarray) -> None:
        """Backpropagate ``grad`` (d loss / d output) through the stack."""
        if not self._forward_ready:
            raise RuntimeError("backward called without a preceding train-mode forward")
        g = np.asarray(grad, dtype=self.dtype)
        for i in range(len(self.layers) - 1, -1, -1):
            g = self.layers[i].backward(g, need_input_grad=i > 0)
        self._forward_ready = False

    # -- parameter access -------------------------------------------------

    def parameters(self):
        """Yield (layer_index, name, array) for every parameter."""
        for i, layer in enumerate(self.layers):
            for name in sorted(layer.params):
                yield i, name, layer.params[name]

    def trainable_arrays(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Aligned (params, grads) lists over trainable layers only."""
        params, grads = [], []
        for layer in self.layers:
            if not layer.trainable:
                continue
            for name in sorted(layer.params):
                params.append(layer.params[name])
                grads.append(layer.grads[name])
        return params, grads

    def get_state(self) -> dict[tuple[int, str], np.ndarray]:
        return {(i, name): arr.copy() for i, name, arr in self.parameters()}

    def set_state(self, state: dict[tuple[int, str], np.ndarray]) -> None:
        for i, name, arr in self.parameters():
            arr[...] = state[(i, name)]

    def param_hash(self, layer_indices: list[int] | None = None) -> str:
        """sha256 over parameter bytes, stable across runs/processes."""
        digest = hashlib.sha256()
        for i, name, arr in self.parameters():
            if layer_indices is not None and i not in layer_indices:
                continue
            digest.update(f"{i}:{name}:{arr.shape}:{arr.dtype}".encode())
            digest.update(np.ascontiguousarray(arr).tobytes())
        return digest.hexdigest()

    def num_params(self) -> int:
        return sum(arr.size for _, _, arr in self.parameters())
