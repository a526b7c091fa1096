"""Adam with global gradient-norm clipping."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["AdamState", "adam_step", "clip_global_norm", "NonFiniteGradientError",
           "ADAM_BETA1", "ADAM_BETA2", "ADAM_EPS"]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class NonFiniteGradientError(RuntimeError):
    """Raised when gradients are not finite after clipping."""


def clip_global_norm(grads: list[np.ndarray], clip_norm: float) -> float:
    """Scale ``grads`` in place so their joint L2 norm is <= ``clip_norm``.

    Returns the pre-clip norm. Raises :class:`NonFiniteGradientError` if
    the norm is not finite (scaling an infinite gradient would produce
    NaNs, so the caller must abort the step).
    """
    total = 0.0
    for g in grads:
        total += float(np.dot(g.ravel(), g.ravel()))
    norm = math.sqrt(total)
    if not math.isfinite(norm):
        raise NonFiniteGradientError(f"gradient norm is {norm}")
    if norm > clip_norm and norm > 0.0:
        scale = clip_norm / norm
        for g in grads:
            g *= scale
    return norm


@dataclass
class AdamState:
    """First/second moment buffers plus the step counter."""

    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def ensure(self, params: list[np.ndarray]) -> None:
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState, learning_rate: float,
              clip_norm: float | None = None) -> AdamState:
    """One Adam update, in place.

    Clips the global gradient norm first (when ``clip_norm`` is given),
    then applies bias-corrected moment updates:
    theta <- theta - lr * m_hat / (sqrt(v_hat) + eps).
    """
    state.ensure(params)
    if clip_norm is not None:
        clip_global_norm(grads, clip_norm)
    state.step += 1
    t = state.step
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        mhat = m / bc1
        vhat = v / bc2
        p -= (learning_rate * mhat / (np.sqrt(vhat) + ADAM_EPS)).astype(p.dtype)
    return state
