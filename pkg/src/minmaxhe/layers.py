"""Layers with forward/backward passes, the Min-Max normalization layer, and Network.

Every layer works on batched float64 arrays: (N, features) for dense data,
(N, C, H, W) for images. ``forward`` returns ``(output, cache)``;
``backward`` consumes that cache and returns ``(grad_input, grad_params)``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import tensor as T
from .approx import ActivationKind, ChebyshevSeries
from .errors import (CacheMismatch, ConfigError, EmptyBatch, ShapeMismatch,
                     Uninitialized)

TRAIN = "train"
INFER = "infer"

PER_FEATURE_MAP = "per-feature-map"
PER_TENSOR = "per-tensor"


def _check_mode(mode):
    if mode not in (TRAIN, INFER):
        raise ValueError(f"mode must be {TRAIN!r} or {INFER!r}, got {mode!r}")


@dataclass
class Cache:
    layer: "Layer"
    data: tuple


class Layer:
    kind = "layer"
    parametric = False

    def params(self) -> dict:
        return {}

    def output_shape(self, in_shape: tuple) -> tuple:
        return tuple(in_shape)

    def forward(self, x: np.ndarray, mode: str = INFER):
        raise NotImplementedError

    def backward(self, cache: Cache, grad_out: np.ndarray):
        raise NotImplementedError

    def _unpack(self, cache) -> tuple:
        if not isinstance(cache, Cache) or cache.layer is not self:
            raise CacheMismatch(f"cache was not produced by this {self.kind} layer")
        return cache.data

    def config(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        d = {"kind": self.kind, **self.config()}
        for name, value in self.params().items():
            d[name] = tensor_to_json(value)
        return d

    def copy(self) -> "Layer":
        return layer_from_dict(self.to_dict())

    def __repr__(self):
        cfg = ", ".join(f"{k}={v}" for k, v in self.config().items())
        return f"{type(self).__name__}({cfg})"


def tensor_to_json(t: np.ndarray) -> dict:
    return {"shape": list(t.shape), "data": [float(v) for v in t.ravel()]}


def tensor_from_json(d: dict) -> np.ndarray:
    shape = d["shape"]
    if len(shape) == 0:
        return np.array(d["data"][0], dtype=np.float64)
    return T.create(shape, d["data"])


class Dense(Layer):
    """y = x W^T + b with W of shape (out, in)."""

    kind = "dense"
    parametric = True

    def __init__(self, W, b):
        self.W = T.as_tensor(W)
        self.b = T.as_tensor(b)
        if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
            raise ShapeMismatch(f"dense weights {self.W.shape} and bias {self.b.shape} disagree")

    def params(self):
        return {"W": self.W, "b": self.b}

    def output_shape(self, in_shape):
        if tuple(in_shape) != (self.W.shape[1],):
            raise ShapeMismatch(f"dense layer expects ({self.W.shape[1]},), got {tuple(in_shape)}")
        return (self.W.shape[0],)

    def forward(self, x, mode=INFER):
        _check_mode(mode)
        single = x.ndim == 1
        x2 = x[None, :] if single else x
        if x2.ndim != 2 or x2.shape[1] != self.W.shape[1]:
            raise ShapeMismatch(f"dense layer expects (N, {self.W.shape[1]}), got {x.shape}")
        y = x2 @ self.W.T + self.b
        return (y[0] if single else y), Cache(self, (x2, single))

    def backward(self, cache, grad_out):
        x2, single = self._unpack(cache)
        g = grad_out[None, :] if single else grad_out
        grads = {"W": g.T @ x2, "b": g.sum(axis=0)}
        gin = g @ self.W
        return (gin[0] if single else gin), grads


class Conv2D(Layer):
    kind = "conv2d"
    parametric = True

    def __init__(self, kernels, b, stride: int = 1, padding: int = 0):
        self.kernels = T.as_tensor(kernels)
        self.b = T.as_tensor(b)
        self.stride = int(stride)
        self.padding = int(padding)
        if self.kernels.ndim != 4 or self.b.shape != (self.kernels.shape[0],):
            raise ShapeMismatch(
                f"conv kernels {self.kernels.shape} and bias {self.b.shape} disagree")
        if self.stride < 1 or self.padding < 0:
            raise ConfigError("stride must be >= 1 and padding >= 0")

    def params(self):
        return {"kernels": self.kernels, "b": self.b}

    def config(self):
        return {"stride": self.stride, "padding": self.padding}

    def output_shape(self, in_shape):
        if len(in_shape) != 3 or in_shape[0] != self.kernels.shape[1]:
            raise ShapeMismatch(f"conv expects ({self.kernels.shape[1]}, H, W), got {tuple(in_shape)}")
        _, h, w = in_shape
        kh, kw = self.kernels.shape[2:]
        ho = T.conv_output_size(h, kh, self.stride, self.padding)
        wo = T.conv_output_size(w, kw, self.stride, self.padding)
        if ho < 1 or wo < 1:
            raise ShapeMismatch(f"kernel {kh}x{kw} does not fit input {h}x{w}")
        return (self.kernels.shape[0], ho, wo)

    def forward(self, x, mode=INFER):
        _check_mode(mode)
        y, xp = T.conv2d(x, self.kernels, self.b, self.stride, self.padding)
        return y, Cache(self, (xp,))

    def backward(self, cache, grad_out):
        (xp,) = self._unpack(cache)
        gx, gk, gb = T.conv2d_backward(grad_out, xp, self.kernels, self.stride, self.padding)
        return gx, {"kernels": gk, "b": gb}


class _Pool(Layer):
    average = False

    def __init__(self, k: int, stride: Optional[int] = None):
        self.k = int(k)
        self.stride = int(stride) if stride is not None else self.k
        if self.k < 1 or self.stride < 1:
            raise ConfigError("pool size and stride must be positive")

    def config(self):
        return {"k": self.k, "stride": self.stride}

    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeMismatch(f"pooling expects (C, H, W), got {tuple(in_shape)}")
        c, h, w = in_shape
        ho, wo = T.conv_output_size(h, self.k, self.stride, 0), T.conv_output_size(w, self.k, self.stride, 0)
        if ho < 1 or wo < 1:
            raise ShapeMismatch(f"pool window {self.k} does not fit {h}x{w}")
        return (c, ho, wo)

    def forward(self, x, mode=INFER):
        _check_mode(mode)
        y = T.pool_sum(x, self.k, self.stride)
        if self.average:
            y = y / (self.k * self.k)
        return y, Cache(self, (x.shape,))

    def backward(self, cache, grad_out):
        (shape,) = self._unpack(cache)
        g = T.pool_sum_backward(grad_out, shape, self.k, self.stride)
        if self.average:
            g /= self.k * self.k
        return g, {}


class AvgPool(_Pool):
    kind = "avgpool"
    average = True


class SumPool(_Pool):
    kind = "sumpool"


class _GlobalPool(Layer):
    average = False

    def output_shape(self, in_shape):
        if len(in_shape) != 3:
            raise ShapeMismatch(f"global pooling expects (C, H, W), got {tuple(in_shape)}")
        return (in_shape[0],)

    def forward(self, x, mode=INFER):
        _check_mode(mode)
        if x.ndim != 4:
            raise ShapeMismatch(f"global pooling expects (N, C, H, W), got {x.shape}")
        y = x.sum(axis=(2, 3))
        if self.average:
            y = y / (x.shape[2] * x.shape[3])
        return y, Cache(self, (x.shape,))

    def backward(self, cache, grad_out):
        (shape,) = self._unpack(cache)
        g = np.broadcast_to(grad_out[:, :, None, None], shape).copy()
        if self.average:
            g /= shape[2] * shape[3]
        return g, {}


class GlobalAvgPool(_GlobalPool):
    kind = "global_avgpool"
    average = True


class GlobalSumPool(_GlobalPool):
    kind = "global_sumpool"


class Flatten(Layer):
    kind = "flatten"

    def output_shape(self, in_shape):
        return (int(np.prod(in_shape)),)

    def forward(self, x, mode=INFER):
        _check_mode(mode)
        return x.reshape(x.shape[0], -1), Cache(self, (x.shape,))

    def backward(self, cache, grad_out):
        (shape,) = self._unpack(cache)
        return grad_out.reshape(shape), {}


class Activation(Layer):
    kind = "activation"

    def __init__(self, fn: ActivationKind):
        self.fn = fn

    def config(self):
        return self.fn.to_dict()

    def forward(self, x, mode=INFER):
        _check_mode(mode)
        return self.fn(x), Cache(self, (x,))

    def backward(self, cache, grad_out):
        (x,) = self._unpack(cache)
        return grad_out * self.fn.derivative(x), {}


class PolyActivation(Layer):
    kind = "poly_activation"

    def __init__(self, series: ChebyshevSeries):
        self.series = series
        self._deriv = series.derivative()

    def config(self):
        return {"series": self.series.to_dict()}

    def forward(self, x, mode=INFER):
        _check_mode(mode)
        y = np.asarray(self.series(x))
        return T.check_finite(y, "polynomial activation output"), Cache(self, (x,))

    def backward(self, cache, grad_out):
        (x,) = self._unpack(cache)
        return grad_out * np.asarray(self._deriv(x)), {}


# -- Min-Max normalization ----------------------------------------------------

@dataclass
class MinMaxState:
    r_min: float = -1.0
    r_max: float = 1.0
    momentum: float = 0.99
    axis_policy: str = PER_FEATURE_MAP
    running_min: Optional[np.ndarray] = None
    running_max: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.r_min < self.r_max:
            raise ConfigError(f"target range [{self.r_min}, {self.r_max}] is empty")
        if not 0.0 < self.momentum < 1.0:
            raise ConfigError("momentum must lie in (0, 1)")
        if self.axis_policy not in (PER_FEATURE_MAP, PER_TENSOR):
            raise ConfigError(f"unknown axis policy {self.axis_policy!r}")

    @property
    def initialized(self) -> bool:
        return self.running_min is not None

    def reduce_axes(self, ndim: int) -> tuple:
        if self.axis_policy == PER_TENSOR:
            return tuple(range(ndim))
        if ndim < 2:
            raise ShapeMismatch("per-feature-map policy needs a channel axis")
        return (0,) + tuple(range(2, ndim))

    def to_dict(self) -> dict:
        d = {"range": [self.r_min, self.r_max], "momentum": self.momentum,
             "policy": self.axis_policy}
        if self.initialized:
            d["running_min"] = tensor_to_json(np.asarray(self.running_min))
            d["running_max"] = tensor_to_json(np.asarray(self.running_max))
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MinMaxState":
        r_min, r_max = d.get("range", (-1.0, 1.0))
        st = cls(float(r_min), float(r_max), float(d.get("momentum", 0.99)),
                 d.get("policy", PER_FEATURE_MAP))
        if "running_min" in d:
            st.running_min = tensor_from_json(d["running_min"])
            st.running_max = tensor_from_json(d["running_max"])
        return st


def _broadcast_stat(stat: np.ndarray, state: MinMaxState, ndim: int) -> np.ndarray:
    if state.axis_policy == PER_TENSOR:
        return stat
    return np.reshape(stat, (1, -1) + (1,) * (ndim - 2))


def minmax_scale(state: MinMaxState, x_min, x_max):
    """Slope and offset so that the normalized output is slope * x + offset.

    Groups with x_max == x_min get slope 0 and land on the range midpoint.
    """
    x_min = np.asarray(x_min, dtype=np.float64)
    x_max = np.asarray(x_max, dtype=np.float64)
    width = x_max - x_min
    flat = width == 0
    safe = np.where(flat, 1.0, width)
    slope = np.where(flat, 0.0, (state.r_max - state.r_min) / safe)
    offset = np.where(flat, 0.5 * (state.r_min + state.r_max), state.r_min - slope * x_min)
    return slope, offset


def minmax_apply(state: MinMaxState, x: np.ndarray, x_min, x_max) -> np.ndarray:
    """Affine Min-Max map of ``x`` using the given extrema."""
    slope, _ = minmax_scale(state, x_min, x_max)
    lo = _broadcast_stat(np.asarray(x_min, dtype=np.float64), state, x.ndim)
    s = _broadcast_stat(slope, state, x.ndim)
    mid = 0.5 * (state.r_min + state.r_max)
    flat = _broadcast_stat(np.asarray(x_max) == np.asarray(x_min), state, x.ndim)
    y = s * (x - lo) + state.r_min
    return np.where(flat, mid, y) if np.any(flat) else y


def minmax_forward_train(state: MinMaxState, batch: np.ndarray):
    """Normalize with the batch extrema and update the running extrema.

    Returns ``(output, new_state)``; ``state`` itself is left untouched.
    """
    if batch.size == 0:
        raise EmptyBatch("Min-Max layer received an empty batch")
    axes = state.reduce_axes(batch.ndim)
    x_min, x_max = T.reduce_extrema(batch, axes)
    out = minmax_apply(state, batch, x_min, x_max)
    if state.initialized:
        m = state.momentum
        run_min = m * state.running_min + (1.0 - m) * x_min
        run_max = m * state.running_max + (1.0 - m) * x_max
    else:
        run_min, run_max = np.array(x_min, copy=True), np.array(x_max, copy=True)
    new = dataclasses.replace(state, running_min=run_min, running_max=run_max)
    return out, new


def minmax_forward_infer(state: MinMaxState, x: np.ndarray) -> np.ndarray:
    """Affine map using the running extrema; no clamping."""
    if not state.initialized:
        raise Uninitialized("Min-Max layer has no running statistics yet")
    return minmax_apply(state, x, state.running_min, state.running_max)


class MinMax(Layer):
    kind = "minmax"

    def __init__(self, state: Optional[MinMaxState] = None):
        self.state = state if state is not None else MinMaxState()

    def config(self):
        return self.state.to_dict()

    def forward(self, x, mode=INFER):
        _check_mode(mode)
        if mode == TRAIN:
            axes = self.state.reduce_axes(x.ndim)
            x_min, x_max = T.reduce_extrema(x, axes)
            y, self.state = minmax_forward_train(self.state, x)
        else:
            y = minmax_forward_infer(self.state, x)
            x_min, x_max = self.state.running_min, self.state.running_max
        slope, _ = minmax_scale(self.state, x_min, x_max)
        return y, Cache(self, (_broadcast_stat(slope, self.state, x.ndim),))

    def backward(self, cache, grad_out):
        # extrema are treated as constants
        (slope,) = self._unpack(cache)
        return grad_out * slope, {}


# -- generic entry points ------------------------------------------------------

def forward(layer: Layer, x: np.ndarray, mode: str = INFER):
    return layer.forward(x, mode)


def backward(layer: Layer, cache: Cache, grad_out: np.ndarray):
    return layer.backward(cache, grad_out)


LAYER_TYPES = {cls.kind: cls for cls in (
    Dense, Conv2D, AvgPool, SumPool, GlobalAvgPool, GlobalSumPool, Flatten,
    Activation, PolyActivation, MinMax)}


def layer_from_dict(d: dict) -> Layer:
    kind = d.get("kind")
    if kind == "dense":
        return Dense(tensor_from_json(d["W"]), tensor_from_json(d["b"]))
    if kind == "conv2d":
        return Conv2D(tensor_from_json(d["kernels"]), tensor_from_json(d["b"]),
                      d.get("stride", 1), d.get("padding", 0))
    if kind in ("avgpool", "sumpool"):
        return LAYER_TYPES[kind](d["k"], d.get("stride"))
    if kind in ("global_avgpool", "global_sumpool", "flatten"):
        return LAYER_TYPES[kind]()
    if kind == "activation":
        return Activation(ActivationKind.from_dict(d))
    if kind == "poly_activation":
        return PolyActivation(ChebyshevSeries.from_dict(d["series"]))
    if kind == "minmax":
        return MinMax(MinMaxState.from_dict(d))
    raise ConfigError(f"unknown layer kind {kind!r}")


class Network:
    """An ordered stack of layers applied to batches of ``input_shape`` samples."""

    def __init__(self, layers, input_shape, num_classes: int, seed: Optional[int] = None):
        self.layers = list(layers)
        self.input_shape = tuple(int(s) for s in input_shape)
        self.num_classes = int(num_classes)
        self.seed = seed
        self.validate()

    def shapes(self) -> list:
        """Per-sample shapes: input first, then after each layer."""
        shapes = [self.input_shape]
        for i, layer in enumerate(self.layers):
            try:
                shapes.append(layer.output_shape(shapes[-1]))
            except ShapeMismatch as exc:
                raise ShapeMismatch(f"layer {i} ({layer.kind}): {exc}") from None
        return shapes

    def validate(self):
        out = self.shapes()[-1]
        if int(np.prod(out)) != self.num_classes:
            raise ShapeMismatch(f"network output {out} does not match {self.num_classes} classes")

    def forward(self, x: np.ndarray, mode: str = INFER) -> np.ndarray:
        for layer in self.layers:
            x, _ = layer.forward(x, mode)
        return x

    __call__ = forward

    def forward_train(self, x: np.ndarray):
        caches = []
        for layer in self.layers:
            x, cache = layer.forward(x, TRAIN)
            caches.append(cache)
        return x, caches

    def backward(self, caches, grad_out):
        """Parameter gradients as ``{layer_index: {name: grad}}``."""
        grads = {}
        g = grad_out
        for i in range(len(self.layers) - 1, -1, -1):
            g, gp = self.layers[i].backward(caches[i], g)
            if gp:
                grads[i] = gp
        return grads

    def predict(self, x: np.ndarray, batch_size: int = 500) -> np.ndarray:
        out = []
        for start in range(0, x.shape[0], batch_size):
            logits = self.forward(x[start:start + batch_size], INFER)
            out.append(np.argmax(logits.reshape(logits.shape[0], -1), axis=1))
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)

    def parameters(self):
        for i, layer in enumerate(self.layers):
            for name, value in layer.params().items():
                yield i, name, value

    def indices_of(self, *layer_types) -> list:
        return [i for i, l in enumerate(self.layers) if isinstance(l, layer_types)]

    def to_dict(self) -> dict:
        return {"format": "minmaxhe-model", "version": 1,
                "input_shape": list(self.input_shape),
                "num_classes": self.num_classes, "seed": self.seed,
                "layers": [l.to_dict() for l in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "Network":
        return cls([layer_from_dict(l) for l in d["layers"]], d["input_shape"],
                   d["num_classes"], d.get("seed"))

    def copy(self) -> "Network":
        return Network([l.copy() for l in self.layers], self.input_shape,
                       self.num_classes, self.seed)

    def __repr__(self):
        body = "\n".join(f"  [{i}] {l!r}" for i, l in enumerate(self.layers))
        return f"Network(input={self.input_shape}, classes={self.num_classes})\n{body}"
