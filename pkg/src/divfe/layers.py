"""Feature-extractor building blocks with forward passes and gradients.

All layers operate on batched channels-first arrays: ``(N, C, L)`` for 1D
signals, ``(N, C, H, W)`` for images, ``(N, D)`` after flattening. Forward
passes record a single entry on a :class:`~divfe.numerics.GradientTape`;
the backward closure returns gradients for the input and every trainable
parameter, so :func:`divfe.numerics.backward` reaches all of them.

Convolution is implemented as cross-correlation (the usual CNN convention),
stride 1. Padding is ``valid`` by default; ``same`` zero-padding is available
for architectures whose filters would otherwise outgrow the map.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .numerics import ContractError, GradientTape, ShapeError

BN_EPSILON = 1e-5
BN_MOMENTUM = 0.9
DEFAULT_DROPOUT_RATE = 0.25


class Layer:
    """Base layer: configuration at construction, parameters at wiring."""

    def wire(self, in_shape: tuple) -> tuple:
        """Validate and return the per-sample output shape."""
        raise NotImplementedError

    def init_params(self, rng: np.random.Generator) -> None:
        pass

    def forward(self, x: np.ndarray, mode: str = "infer",
                tape: GradientTape | None = None) -> np.ndarray:
        raise NotImplementedError

    @property
    def trainable_params(self) -> list:
        return []

    @property
    def state_arrays(self) -> list:
        """Trainable parameters plus persistent buffers (running stats)."""
        return list(self.trainable_params)

    def weight_count(self) -> int:
        """Multiplicative connection weights (biases and norm params excluded)."""
        return 0

    def spec_line(self) -> str:
        raise NotImplementedError


def _he_init(rng, shape, fan_in):
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size=shape)


class Conv1D(Layer):
    """1D cross-correlation, stride 1, summed over input planes, plus bias."""

    def __init__(self, filter_len: int, planes: int, padding: str = "valid"):
        if filter_len < 1 or planes < 1:
            raise ContractError("filter_len and planes must be >= 1")
        if padding not in ("valid", "same"):
            raise ContractError(f"unknown padding {padding!r}")
        self.filter_len = filter_len
        self.planes = planes
        self.padding = padding
        self.in_planes = None
        self.weights = None  # (planes, in_planes, filter_len)
        self.bias = None     # (planes,)

    def wire(self, in_shape):
        if len(in_shape) != 2:
            raise ShapeError(f"Conv1D expects (planes, length) input, got {in_shape}")
        c, length = in_shape
        if self.padding == "valid" and self.filter_len > length:
            raise ShapeError(f"filter length {self.filter_len} exceeds input length {length}")
        self.in_planes = c
        out_len = length if self.padding == "same" else length - self.filter_len + 1
        return (self.planes, out_len)

    def init_params(self, rng):
        fan_in = self.in_planes * self.filter_len
        self.weights = _he_init(rng, (self.planes, self.in_planes, self.filter_len), fan_in)
        self.bias = np.zeros(self.planes)

    @property
    def trainable_params(self):
        return [self.weights, self.bias]

    def weight_count(self):
        return self.planes * self.in_planes * self.filter_len

    def spec_line(self):
        pad = " same" if self.padding == "same" else ""
        return f"conv1d {self.filter_len} {self.planes}{pad}"

    def forward(self, x, mode="infer", tape=None):
        n, c, length = x.shape
        f = self.filter_len
        if self.padding == "same":
            lo, hi = (f - 1) // 2, f // 2
            xp = np.pad(x, ((0, 0), (0, 0), (lo, hi)))
        else:
            lo = 0
            xp = x
        out_len = xp.shape[2] - f + 1
        cols = (sliding_window_view(xp, f, axis=2)          # (N, C, Lo, f)
                .transpose(0, 2, 1, 3).reshape(n * out_len, c * f))
        w_mat = self.weights.reshape(self.planes, c * f)
        y = (cols @ w_mat.T + self.bias).reshape(n, out_len, self.planes).transpose(0, 2, 1)

        if tape is not None:
            weights, bias = self.weights, self.bias

            def bwd(dy):
                dy_m = dy.transpose(0, 2, 1).reshape(n * out_len, self.planes)
                db = dy_m.sum(axis=0)
                dw = (dy_m.T @ cols).reshape(weights.shape)
                dcols = (dy_m @ w_mat).reshape(n, out_len, c, f)
                dxp = np.zeros_like(xp)
                for u in range(f):
                    dxp[:, :, u:u + out_len] += dcols[:, :, :, u].transpose(0, 2, 1)
                dx = dxp[:, :, lo:lo + length] if self.padding == "same" else dxp
                return dx, dw, db

            tape.record(y, (x, weights, bias), bwd, "conv1d")
        return y


class Conv2D(Layer):
    """2D cross-correlation, stride 1, summed over input planes, plus bias."""

    def __init__(self, filter_h: int, filter_w: int, planes: int, padding: str = "valid"):
        if filter_h < 1 or filter_w < 1 or planes < 1:
            raise ContractError("filter extents and planes must be >= 1")
        if padding not in ("valid", "same"):
            raise ContractError(f"unknown padding {padding!r}")
        self.filter_h = filter_h
        self.filter_w = filter_w
        self.planes = planes
        self.padding = padding
        self.in_planes = None
        self.weights = None  # (planes, in_planes, fh, fw)
        self.bias = None

    def wire(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeError(f"Conv2D expects (planes, height, width) input, got {in_shape}")
        c, h, w = in_shape
        if self.padding == "valid" and (self.filter_h > h or self.filter_w > w):
            raise ShapeError(f"filter {self.filter_h}x{self.filter_w} exceeds input {h}x{w}")
        self.in_planes = c
        if self.padding == "same":
            return (self.planes, h, w)
        return (self.planes, h - self.filter_h + 1, w - self.filter_w + 1)

    def init_params(self, rng):
        fan_in = self.in_planes * self.filter_h * self.filter_w
        shape = (self.planes, self.in_planes, self.filter_h, self.filter_w)
        self.weights = _he_init(rng, shape, fan_in)
        self.bias = np.zeros(self.planes)

    @property
    def trainable_params(self):
        return [self.weights, self.bias]

    def weight_count(self):
        return self.planes * self.in_planes * self.filter_h * self.filter_w

    def spec_line(self):
        pad = " same" if self.padding == "same" else ""
        return f"conv2d {self.filter_h}x{self.filter_w} {self.planes}{pad}"

    def forward(self, x, mode="infer", tape=None):
        n, c, h, w = x.shape
        fh, fw = self.filter_h, self.filter_w
        if self.padding == "same":
            top, bottom = (fh - 1) // 2, fh // 2
            left, right = (fw - 1) // 2, fw // 2
            xp = np.pad(x, ((0, 0), (0, 0), (top, bottom), (left, right)))
        else:
            top = left = 0
            xp = x
        ho = xp.shape[2] - fh + 1
        wo = xp.shape[3] - fw + 1
        cols = (sliding_window_view(xp, (fh, fw), axis=(2, 3))   # (N, C, Ho, Wo, fh, fw)
                .transpose(0, 2, 3, 1, 4, 5).reshape(n * ho * wo, c * fh * fw))
        w_mat = self.weights.reshape(self.planes, c * fh * fw)
        y = (cols @ w_mat.T + self.bias).reshape(n, ho, wo, self.planes).transpose(0, 3, 1, 2)

        if tape is not None:
            weights, bias = self.weights, self.bias

            def bwd(dy):
                dy_m = dy.transpose(0, 2, 3, 1).reshape(n * ho * wo, self.planes)
                db = dy_m.sum(axis=0)
                dw = (dy_m.T @ cols).reshape(weights.shape)
                dcols = (dy_m @ w_mat).reshape(n, ho, wo, c, fh, fw)
                dxp = np.zeros_like(xp)
                for u in range(fh):
                    for v in range(fw):
                        dxp[:, :, u:u + ho, v:v + wo] += dcols[:, :, :, :, u, v].transpose(0, 3, 1, 2)
                dx = dxp[:, :, top:top + h, left:left + w] if self.padding == "same" else dxp
                return dx, dw, db

            tape.record(y, (x, weights, bias), bwd, "conv2d")
        return y


class MaxPool(Layer):
    """Non-overlapping max pooling over every spatial dimension.

    Spatial extents must be divisible by the window. Gradient flows to the
    first maximal position of each window in row-major order.
    """

    def __init__(self, window: int):
        if window < 1:
            raise ContractError("window must be >= 1")
        self.window = window

    def wire(self, in_shape):
        if len(in_shape) not in (2, 3):
            raise ShapeError(f"MaxPool expects spatial input, got {in_shape}")
        spatial = in_shape[1:]
        for ext in spatial:
            if ext % self.window != 0:
                raise ShapeError(f"extent {ext} not divisible by window {self.window}")
        return (in_shape[0],) + tuple(ext // self.window for ext in spatial)

    def spec_line(self):
        return f"maxpool {self.window}"

    def forward(self, x, mode="infer", tape=None):
        k = self.window
        if x.ndim == 3:
            n, c, length = x.shape
            lo = length // k
            win = x.reshape(n, c, lo, k)
            idx = win.argmax(axis=-1)
            y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

            def bwd(dy):
                dwin = np.zeros_like(win)
                np.put_along_axis(dwin, idx[..., None], dy[..., None], axis=-1)
                return (dwin.reshape(x.shape),)
        elif x.ndim == 4:
            n, c, h, w = x.shape
            ho, wo = h // k, w // k
            # windows in row-major (u, v) order so argmax ties resolve row-major
            win = (x.reshape(n, c, ho, k, wo, k)
                   .transpose(0, 1, 2, 4, 3, 5).reshape(n, c, ho, wo, k * k))
            idx = win.argmax(axis=-1)
            y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]

            def bwd(dy):
                dwin = np.zeros_like(win)
                np.put_along_axis(dwin, idx[..., None], dy[..., None], axis=-1)
                dx = (dwin.reshape(n, c, ho, wo, k, k)
                      .transpose(0, 1, 2, 4, 3, 5).reshape(x.shape))
                return (dx,)
        else:
            raise ShapeError(f"MaxPool expects rank-3 or rank-4 input, got {x.shape}")

        if tape is not None:
            tape.record(y, (x,), bwd, "maxpool")
        return y


class BatchNorm(Layer):
    """Per-plane batch normalization with learnable scale and shift.

    Training normalizes by batch statistics and updates running statistics by
    an exponential moving average; inference uses the running statistics.
    """

    def __init__(self, epsilon: float = BN_EPSILON, momentum: float = BN_MOMENTUM):
        self.epsilon = epsilon
        self.momentum = momentum
        self.planes = None
        self.scale = None
        self.shift = None
        self.running_mean = None
        self.running_var = None

    def wire(self, in_shape):
        self.planes = in_shape[0]
        return tuple(in_shape)

    def init_params(self, rng):
        self.scale = np.ones(self.planes)
        self.shift = np.zeros(self.planes)
        self.running_mean = np.zeros(self.planes)
        self.running_var = np.ones(self.planes)

    @property
    def trainable_params(self):
        return [self.scale, self.shift]

    @property
    def state_arrays(self):
        return [self.scale, self.shift, self.running_mean, self.running_var]

    def spec_line(self):
        return "batchnorm"

    def _param_shape(self, ndim):
        return (1, self.planes) + (1,) * (ndim - 2)

    def forward(self, x, mode="infer", tape=None):
        axes = (0,) + tuple(range(2, x.ndim))
        pshape = self._param_shape(x.ndim)
        gamma = self.scale.reshape(pshape)
        beta = self.shift.reshape(pshape)

        if mode == "train":
            if x.shape[0] < 2:
                raise ContractError("batch normalization needs batch size >= 2 in training")
            mu = x.mean(axis=axes, keepdims=True)
            var = x.var(axis=axes, keepdims=True)
            inv_std = 1.0 / np.sqrt(var + self.epsilon)
            xhat = (x - mu) * inv_std
            y = gamma * xhat + beta
            self.running_mean *= self.momentum
            self.running_mean += (1.0 - self.momentum) * mu.reshape(-1)
            self.running_var *= self.momentum
            self.running_var += (1.0 - self.momentum) * var.reshape(-1)

            if tape is not None:
                m = x.size // self.planes
                scale, shift = self.scale, self.shift

                def bwd(dy):
                    dgamma = (dy * xhat).sum(axis=axes).reshape(-1)
                    dbeta = dy.sum(axis=axes).reshape(-1)
                    dxhat = dy * gamma
                    dx = (inv_std / m) * (
                        m * dxhat
                        - dxhat.sum(axis=axes, keepdims=True)
                        - xhat * (dxhat * xhat).sum(axis=axes, keepdims=True)
                    )
                    return dx, dgamma, dbeta

                tape.record(y, (x, scale, shift), bwd, "batchnorm")
            return y

        inv_std = 1.0 / np.sqrt(self.running_var.reshape(pshape) + self.epsilon)
        xhat = (x - self.running_mean.reshape(pshape)) * inv_std
        y = gamma * xhat + beta
        if tape is not None:
            axes_ = axes

            def bwd(dy):
                dgamma = (dy * xhat).sum(axis=axes_).reshape(-1)
                dbeta = dy.sum(axis=axes_).reshape(-1)
                return dy * gamma * inv_std, dgamma, dbeta

            tape.record(y, (x, self.scale, self.shift), bwd, "batchnorm")
        return y


class Dropout(Layer):
    """Inverted dropout: zero with probability ``rate`` in training, scale
    survivors by 1/(1-rate); identity at inference."""

    def __init__(self, rate: float = DEFAULT_DROPOUT_RATE, seed: int | None = None):
        if not 0.0 <= rate < 1.0:
            raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = np.random.default_rng(seed)

    def reseed(self, seed):
        self.rng = np.random.default_rng(seed)

    def wire(self, in_shape):
        return tuple(in_shape)

    def spec_line(self):
        return f"dropout {self.rate}"

    def forward(self, x, mode="infer", tape=None):
        if mode != "train" or self.rate == 0.0:
            # identity: pass the array through; gradients flow via the
            # surrounding entries without a tape record
            return x
        keep = 1.0 - self.rate
        mask = (self.rng.random(x.shape) >= self.rate) / keep
        y = x * mask
        if tape is not None:
            tape.record(y, (x,), lambda g: (g * mask,), "dropout")
        return y


class ReLU(Layer):
    """Elementwise max(0, x); gradient is 1 where x > 0, else 0."""

    def wire(self, in_shape):
        return tuple(in_shape)

    def spec_line(self):
        return "relu"

    def forward(self, x, mode="infer", tape=None):
        y = np.maximum(x, 0.0)
        if tape is not None:
            gate = (x > 0).astype(np.float64)
            tape.record(y, (x,), lambda g: (g * gate,), "relu")
        return y


class Flatten(Layer):
    """Row-major linearization of each sample."""

    def wire(self, in_shape):
        return (int(np.prod(in_shape)),)

    def spec_line(self):
        return "flatten"

    def forward(self, x, mode="infer", tape=None):
        y = x.reshape(x.shape[0], -1)
        if tape is not None:
            tape.record(y, (x,), lambda g: (g.reshape(x.shape),), "flatten")
        return y


class Dense(Layer):
    """Fully connected layer: weights @ input + bias."""

    def __init__(self, out_dim: int):
        if out_dim < 1:
            raise ContractError("out_dim must be >= 1")
        self.out_dim = out_dim
        self.in_dim = None
        self.weights = None  # (out_dim, in_dim)
        self.bias = None

    def wire(self, in_shape):
        if len(in_shape) != 1:
            raise ShapeError(f"Dense expects flat input, got {in_shape}")
        self.in_dim = in_shape[0]
        return (self.out_dim,)

    def init_params(self, rng):
        self.weights = _he_init(rng, (self.out_dim, self.in_dim), self.in_dim)
        self.bias = np.zeros(self.out_dim)

    @property
    def trainable_params(self):
        return [self.weights, self.bias]

    def weight_count(self):
        return self.out_dim * self.in_dim

    def spec_line(self):
        return f"dense {self.out_dim}"

    def forward(self, x, mode="infer", tape=None):
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeError(f"Dense expects (N, {self.in_dim}), got {x.shape}")
        weights, bias = self.weights, self.bias
        y = x @ weights.T + bias
        if tape is not None:
            def bwd(dy):
                return dy @ weights, dy.T @ x, dy.sum(axis=0)

            tape.record(y, (x, weights, bias), bwd, "dense")
        return y


def mse_loss(output: np.ndarray, target: np.ndarray,
             tape: GradientTape | None = None) -> np.ndarray:
    """Sum of squared differences per sample, averaged over the batch.

    For a single rank-1 output this is the plain unnormalized sum of squares
    with gradient 2*(output - target). Returns a 0-d float64 array.
    """
    output = np.asarray(output, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if output.shape != target.shape:
        raise ShapeError(f"output {output.shape} vs target {target.shape}")
    n = output.shape[0] if output.ndim > 1 else 1
    diff = output - target
    loss = np.asarray(np.sum(diff * diff) / n)
    if tape is not None:
        tape.record(loss, (output, target),
                    lambda g: (g * 2.0 * diff / n, None), "mse")
    return loss


class FeatureExtractor:
    """Ordered layer stack mapping inputs to length-M output vectors.

    Wiring validates every shape at build time; the final per-sample output
    must be a flat vector of length ``rank`` (the Walsh codebook rank).
    """

    def __init__(self, layers: list, input_shape: tuple, rank: int):
        self.layers = list(layers)
        self.input_shape = tuple(int(d) for d in input_shape)
        self.rank = int(rank)
        self.output_shape = self._wire()

    def _wire(self):
        shape = self.input_shape
        for layer in self.layers:
            shape = layer.wire(shape)
        if shape != (self.rank,):
            raise ShapeError(
                f"model output shape {shape} must be ({self.rank},) to match the codebook rank"
            )
        return shape

    def initialize(self, seed: int | np.random.Generator = 0):
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        for layer in self.layers:
            layer.init_params(rng)
        return self

    @property
    def trainable_params(self):
        return [p for layer in self.layers for p in layer.trainable_params]

    @property
    def state_arrays(self):
        return [a for layer in self.layers for a in layer.state_arrays]

    def snapshot(self):
        return [a.copy() for a in self.state_arrays]

    def restore(self, snapshot):
        for dst, src in zip(self.state_arrays, snapshot, strict=True):
            np.copyto(dst, src)

    def weight_count(self) -> int:
        """Connection weights only: filter and dense-matrix coefficients."""
        return sum(layer.weight_count() for layer in self.layers)

    def reseed_dropout(self, seed: int):
        for i, layer in enumerate(self.layers):
            if isinstance(layer, Dropout):
                layer.reseed((seed, i))

    def _with_channel(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] == self.input_shape:
            return x
        if self.input_shape[0] == 1 and x.shape[1:] == self.input_shape[1:]:
            return x.reshape((x.shape[0],) + self.input_shape)
        raise ShapeError(f"input batch shape {x.shape[1:]} does not match model "
                         f"input {self.input_shape}")

    def forward(self, x, mode: str = "infer", tape: GradientTape | None = None):
        out = self._with_channel(x)
        for layer in self.layers:
            out = layer.forward(out, mode=mode, tape=tape)
        return out

    def spec_lines(self):
        return [layer.spec_line() for layer in self.layers]
