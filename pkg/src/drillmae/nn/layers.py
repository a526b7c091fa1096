"""Network layers with explicit forward/backward passes.

Everything is plain numpy. Each layer owns its parameters and gradient
buffers; ``forward`` caches whatever the matching ``backward`` needs.
Recurrent layers unroll over time (backpropagation through time); the
input projection for all timesteps is batched into one GEMM so the
per-step loop only carries the recurrent matmul.

Array conventions: sequence tensors are (batch, time, features),
vectors are (batch, features). A recurrent layer fed a 2-D input treats
it as a length-1 sequence, which is how a downstream head consumes an
encoder's context vector.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "Layer",
    "Recurrent",
    "Affine",
    "TimeDistributedAffine",
    "Dropout",
]


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # exp overflow for very negative inputs saturates to 0, which is the
    # correct limit; suppress the warning rather than branch.
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def _uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int,
             dtype: np.dtype) -> np.ndarray:
    k = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-k, k, size=shape).astype(dtype)


class Layer:
    """Base layer: parameter/gradient store plus the forward/backward pair."""

    kind = "base"

    def __init__(self, trainable: bool = True):
        self.trainable = trainable
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self._cache = None

    def build(self, input_shape: tuple[int, ...], rng: np.random.Generator,
              dtype: np.dtype) -> tuple[int, ...]:
        """Allocate parameters for ``input_shape`` and return the output shape.

        Shapes exclude the batch dimension: ``(T, F)`` for sequences,
        ``(F,)`` for vectors.
        """
        raise NotImplementedError

    def forward(self, x: np.ndarray, train: bool = False,
                rng: np.random.Generator | None = None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, grad: np.ndarray, need_input_grad: bool = True):
        raise NotImplementedError

    def _alloc_grads(self):
        self.grads = {k: np.zeros_like(v) for k, v in self.params.items()}

    def _store_grad(self, name: str, value: np.ndarray):
        # Frozen layers keep their gradient slots untouched (all zeros);
        # gradients still flow through to earlier layers.
        if self.trainable:
            self.grads[name][...] = value


class Affine(Layer):
    """Dense layer on (batch, features) input: y = x @ kernel + bias."""

    kind = "affine"

    def __init__(self, width: int, trainable: bool = True):
        super().__init__(trainable)
        self.width = width

    def build(self, input_shape, rng, dtype):
        if len(input_shape) != 1:
            raise ValueError(
                f"affine layer expects a vector input, got shape {input_shape}")
        fan_in = input_shape[0]
        self.params = {
            "kernel": _uniform(rng, (fan_in, self.width), fan_in, dtype),
            "bias": np.zeros(self.width, dtype=dtype),
        }
        self._alloc_grads()
        return (self.width,)

    def forward(self, x, train=False, rng=None):
        self._cache = x
        return x @ self.params["kernel"] + self.params["bias"]

    def backward(self, grad, need_input_grad=True):
        x = self._cache
        self._store_grad("kernel", x.T @ grad)
        self._store_grad("bias", grad.sum(axis=0))
        if need_input_grad:
            return grad @ self.params["kernel"].T
        return None


class TimeDistributedAffine(Layer):
    """Affine map applied independently at every timestep of a sequence."""

    kind = "time_distributed_affine"

    def __init__(self, width: int, trainable: bool = True):
        super().__init__(trainable)
        self.width = width

    def build(self, input_shape, rng, dtype):
        if len(input_shape) != 2:
            raise ValueError(
                "time-distributed affine expects a sequence input, got "
                f"shape {input_shape}")
        t, fan_in = input_shape
        self.params = {
            "kernel": _uniform(rng, (fan_in, self.width), fan_in, dtype),
            "bias": np.zeros(self.width, dtype=dtype),
        }
        self._alloc_grads()
        return (t, self.width)

    def forward(self, x, train=False, rng=None):
        self._cache = x
        b, t, f = x.shape
        out = x.reshape(b * t, f) @ self.params["kernel"] + self.params["bias"]
        return out.reshape(b, t, self.width)

    def backward(self, grad, need_input_grad=True):
        x = self._cache
        b, t, f = x.shape
        gflat = grad.reshape(b * t, self.width)
        self._store_grad("kernel", x.reshape(b * t, f).T @ gflat)
        self._store_grad("bias", gflat.sum(axis=0))
        if need_input_grad:
            return (gflat @ self.params["kernel"].T).reshape(b, t, f)
        return None


class Dropout(Layer):
    """Inverted dropout: active only in train mode, identity at inference."""

    kind = "dropout"

    def __init__(self, rate: float):
        super().__init__(trainable=False)
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def build(self, input_shape, rng, dtype):
        return input_shape

    def forward(self, x, train=False, rng=None):
        if not train or self.rate == 0.0:
            self._cache = None
            return x
        if rng is None:
            raise ValueError("dropout in train mode needs an rng")
        keep = 1.0 - self.rate
        mask = (rng.random(x.shape) < keep).astype(x.dtype) / keep
        self._cache = mask
        return x * mask

    def backward(self, grad, need_input_grad=True):
        if not need_input_grad:
            return None
        if self._cache is None:
            return grad
        return grad * self._cache


class Recurrent(Layer):
    """Stacked-cell recurrent layer (LSTM or GRU) unrolled over time.

    LSTM gates (order i, f, g, o in the fused weight matrices):

        i = sigmoid(x W_i + h U_i + b_i)      f = sigmoid(x W_f + h U_f + b_f)
        g = tanh(x W_g + h U_g + b_g)         o = sigmoid(x W_o + h U_o + b_o)
        c' = f * c + i * g                    h' = o * tanh(c')

    GRU gates (order z, r, c):

        z = sigmoid(x W_z + h U_z + b_z)      r = sigmoid(x W_r + h U_r + b_r)
        hc = tanh(x W_c + (r * h) U_c + b_c)  h' = (1 - z) * h + z * hc

    With ``return_sequences`` the layer emits every hidden state,
    otherwise only the final one.
    """

    kind = "recurrent"

    def __init__(self, cell: str, width: int, return_sequences: bool = False,
                 trainable: bool = True):
        super().__init__(trainable)
        if cell not in ("lstm", "gru"):
            raise ValueError(f"unknown cell kind {cell!r}")
        if width < 1:
            raise ValueError("recurrent width must be >= 1")
        self.cell = cell
        self.width = width
        self.return_sequences = return_sequences

    @property
    def _gates(self) -> int:
        return 4 if self.cell == "lstm" else 3

    def build(self, input_shape, rng, dtype):
        if len(input_shape) == 1:
            # context vector treated as a length-1 sequence
            t, fan_in = 1, input_shape[0]
        elif len(input_shape) == 2:
            t, fan_in = input_shape
        else:
            raise ValueError(
                f"recurrent layer expects 1-D or 2-D input, got {input_shape}")
        h = self.width
        g = self._gates
        kernel = _uniform(rng, (fan_in, g * h), fan_in, dtype)
        recurrent = _uniform(rng, (h, g * h), h, dtype)
        bias = np.zeros(g * h, dtype=dtype)
        if self.cell == "lstm":
            bias[h:2 * h] = 1.0  # forget-gate bias starts open
        self.params = {"kernel": kernel, "recurrent": recurrent, "bias": bias}
        self._alloc_grads()
        return (t, h) if self.return_sequences else (h,)

    # -- forward ------------------------------------------------------------

    def forward(self, x, train=False, rng=None):
        self._expanded = x.ndim == 2
        if self._expanded:
            x = x[:, None, :]
        b, t, f = x.shape
        h = self.width
        kernel = self.params["kernel"]
        recurrent = self.params["recurrent"]
        bias = self.params["bias"]

        # one GEMM for the input projection of every timestep
        xp = (x.reshape(b * t, f) @ kernel + bias).reshape(b, t, self._gates * h)

        if self.cell == "lstm":
            out = self._forward_lstm(x, xp, recurrent, b, t, h)
        else:
            out = self._forward_gru(x, xp, recurrent, b, t, h)
        return out

    def _forward_lstm(self, x, xp, u, b, t, h):
        dt = x.dtype
        gi = np.empty((t, b, h), dt)
        gf = np.empty((t, b, h), dt)
        gg = np.empty((t, b, h), dt)
        go = np.empty((t, b, h), dt)
        cs = np.empty((t, b, h), dt)
        tc = np.empty((t, b, h), dt)
        hs = np.empty((t, b, h), dt)
        hprev = np.zeros((b, h), dt)
        cprev = np.zeros((b, h), dt)
        for step in range(t):
            z = xp[:, step] + hprev @ u
            gi[step] = _sigmoid(z[:, :h])
            gf[step] = _sigmoid(z[:, h:2 * h])
            gg[step] = np.tanh(z[:, 2 * h:3 * h])
            go[step] = _sigmoid(z[:, 3 * h:])
            cprev = gf[step] * cprev + gi[step] * gg[step]
            cs[step] = cprev
            tc[step] = np.tanh(cprev)
            hprev = go[step] * tc[step]
            hs[step] = hprev
        self._cache = (x, gi, gf, gg, go, cs, tc, hs)
        if self.return_sequences:
            return np.ascontiguousarray(hs.transpose(1, 0, 2))
        return hs[-1].copy()

    def _forward_gru(self, x, xp, u, b, t, h):
        dt = x.dtype
        uzr = u[:, :2 * h]
        uc = u[:, 2 * h:]
        gz = np.empty((t, b, h), dt)
        gr = np.empty((t, b, h), dt)
        gc = np.empty((t, b, h), dt)
        rh = np.empty((t, b, h), dt)
        hs = np.empty((t, b, h), dt)
        hprev = np.zeros((b, h), dt)
        for step in range(t):
            a = xp[:, step, :2 * h] + hprev @ uzr
            gz[step] = _sigmoid(a[:, :h])
            gr[step] = _sigmoid(a[:, h:])
            rh[step] = gr[step] * hprev
            gc[step] = np.tanh(xp[:, step, 2 * h:] + rh[step] @ uc)
            hprev = (1.0 - gz[step]) * hprev + gz[step] * gc[step]
            hs[step] = hprev
        self._cache = (x, gz, gr, gc, rh, hs)
        if self.return_sequences:
            return np.ascontiguousarray(hs.transpose(1, 0, 2))
        return hs[-1].copy()

    # -- backward -----------------------------------------------------------

    def backward(self, grad, need_input_grad=True):
        if self.cell == "lstm":
            return self._backward_lstm(grad, need_input_grad)
        return self._backward_gru(grad, need_input_grad)

    def _seq_grad(self, grad, t, b, h, dtype):
        """Per-timestep upstream gradient, (T, B, H); zero-filled when the
        layer only emitted its final state."""
        if self.return_sequences:
            return grad.transpose(1, 0, 2)
        full = np.zeros((t, b, h), dtype)
        full[-1] = grad
        return full

    def _backward_lstm(self, grad, need_input_grad):
        x, gi, gf, gg, go, cs, tc, hs = self._cache
        b, t, f = x.shape
        h = self.width
        u = self.params["recurrent"]
        gseq = self._seq_grad(grad, t, b, h, x.dtype)

        dz = np.empty((t, b, 4 * h), x.dtype)
        du = np.zeros_like(u)
        dh = np.zeros((b, h), x.dtype)
        dc = np.zeros((b, h), x.dtype)
        for step in range(t - 1, -1, -1):
            dh = dh + gseq[step]
            do = dh * tc[step]
            dc = dc + dh * go[step] * (1.0 - tc[step] ** 2)
            cprev = cs[step - 1] if step > 0 else 0.0
            di = dc * gg[step]
            df = dc * cprev
            dg = dc * gi[step]
            dc = dc * gf[step]
            dzs = dz[step]
            dzs[:, :h] = di * gi[step] * (1.0 - gi[step])
            dzs[:, h:2 * h] = df * gf[step] * (1.0 - gf[step])
            dzs[:, 2 * h:3 * h] = dg * (1.0 - gg[step] ** 2)
            dzs[:, 3 * h:] = do * go[step] * (1.0 - go[step])
            if step > 0:
                du += hs[step - 1].T @ dzs
            dh = dzs @ u.T

        dzf = dz.transpose(1, 0, 2).reshape(b * t, 4 * h)
        self._store_grad("kernel", x.reshape(b * t, f).T @ dzf)
        self._store_grad("recurrent", du)
        self._store_grad("bias", dzf.sum(axis=0))
        if need_input_grad:
            dx = (dzf @ self.params["kernel"].T).reshape(b, t, f)
            return dx[:, 0, :] if self._expanded else dx
        return None

    def _backward_gru(self, grad, need_input_grad):
        x, gz, gr, gc, rh, hs = self._cache
        b, t, f = x.shape
        h = self.width
        u = self.params["recurrent"]
        uzr = u[:, :2 * h]
        uc = u[:, 2 * h:]
        gseq = self._seq_grad(grad, t, b, h, x.dtype)

        dz = np.empty((t, b, 3 * h), x.dtype)
        du = np.zeros_like(u)
        dh = np.zeros((b, h), x.dtype)
        for step in range(t - 1, -1, -1):
            dh = dh + gseq[step]
            hprev = hs[step - 1] if step > 0 else np.zeros((b, h), x.dtype)
            dzg = dh * (gc[step] - hprev)
            dhc = dh * gz[step]
            dhprev = dh * (1.0 - gz[step])
            dac = dhc * (1.0 - gc[step] ** 2)
            drh = dac @ uc.T
            dr = drh * hprev
            dhprev = dhprev + drh * gr[step]
            dza = dzg * gz[step] * (1.0 - gz[step])
            dra = dr * gr[step] * (1.0 - gr[step])
            dzs = dz[step]
            dzs[:, :h] = dza
            dzs[:, h:2 * h] = dra
            dzs[:, 2 * h:] = dac
            if step > 0:
                du[:, :2 * h] += hprev.T @ dzs[:, :2 * h]
                du[:, 2 * h:] += rh[step].T @ dac
            dh = dhprev + dzs[:, :2 * h] @ uzr.T

        dzf = dz.transpose(1, 0, 2).reshape(b * t, 3 * h)
        self._store_grad("kernel", x.reshape(b * t, f).T @ dzf)
        self._store_grad("recurrent", du)
        self._store_grad("bias", dzf.sum(axis=0))
        if need_input_grad:
            dx = (dzf @ self.params["kernel"].T).reshape(b, t, f)
            return dx[:, 0, :] if self._expanded else dx
        return None
