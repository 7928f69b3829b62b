"""Network construction from JSON configs and model persistence."""

from __future__ import annotations

import io
import json
import os
from importlib import resources

import numpy as np

from .approx import ActivationKind
from .errors import ConfigError
from .layers import (PER_FEATURE_MAP, PER_TENSOR, Activation, AvgPool, Conv2D,
                     Dense, Flatten, GlobalAvgPool, GlobalSumPool, MinMax,
                     MinMaxState, Network, SumPool, layer_from_dict)


def glorot_uniform(rng, shape, fan_in, fan_out):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def build_network(config: dict, seed: int = 0, *, minmax: bool = True,
                  activation: ActivationKind | None = None,
                  minmax_range=None) -> Network:
    """Instantiate a freshly initialized network from a layer-list config.

    ``minmax=False`` drops the Min-Max layers (the plain baseline);
    ``activation`` and ``minmax_range`` override what the config says.
    """
    try:
        in_shape = tuple(config["input_shape"])
        classes = int(config["num_classes"])
        specs = config["layers"]
    except KeyError as exc:
        raise ConfigError(f"config is missing {exc}") from None
    rng = np.random.default_rng(seed)
    layers, shape = [], in_shape
    for spec in specs:
        kind = spec.get("kind")
        if kind == "conv2d":
            k = int(spec["kernel"])
            out_ch, in_ch = int(spec["out_channels"]), shape[0]
            w = glorot_uniform(rng, (out_ch, in_ch, k, k), in_ch * k * k, out_ch * k * k)
            layer = Conv2D(w, np.zeros(out_ch), spec.get("stride", 1), spec.get("padding", 0))
        elif kind == "dense":
            units, fan_in = int(spec["units"]), int(np.prod(shape))
            layer = Dense(glorot_uniform(rng, (units, fan_in), fan_in, units), np.zeros(units))
        elif kind == "minmax":
            if not minmax:
                continue
            r_min, r_max = minmax_range or spec.get("range", (-1.0, 1.0))
            default_policy = PER_FEATURE_MAP if len(shape) == 3 else PER_TENSOR
            layer = MinMax(MinMaxState(float(r_min), float(r_max),
                                       float(spec.get("momentum", 0.99)),
                                       spec.get("policy", default_policy)))
        elif kind == "activation":
            layer = Activation(activation or ActivationKind.from_dict(spec))
        elif kind in ("avgpool", "sumpool"):
            cls = AvgPool if kind == "avgpool" else SumPool
            layer = cls(spec["k"], spec.get("stride"))
        elif kind == "global_avgpool":
            layer = GlobalAvgPool()
        elif kind == "global_sumpool":
            layer = GlobalSumPool()
        elif kind == "flatten":
            layer = Flatten()
        else:
            raise ConfigError(f"unknown layer kind {kind!r} in config")
        shape = layer.output_shape(shape)
        layers.append(layer)
    return Network(layers, in_shape, classes, seed)


def load_config(path) -> dict:
    with open(path) as f:
        return json.load(f)


def reference_config(name: str = "lenet5_like") -> dict:
    """A config shipped with the package (``lenet5_like`` or ``mlp_minmax``)."""
    text = resources.files("minmaxhe").joinpath("configs", f"{name}.json").read_text()
    return json.loads(text)


def save_model(net: Network, path) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w") as f:
        json.dump(net.to_dict(), f)
    os.replace(tmp, path)


def load_model(path) -> Network:
    with open(path) as f:
        d = json.load(f)
    if d.get("format") != "minmaxhe-model":
        raise ConfigError(f"{path} is not a model file")
    return Network.from_dict(d)


def export_npz(net: Network, path) -> None:
    """Compact binary form: layer structure as JSON plus raw float64 arrays."""
    arrays, layers = {}, []
    for i, layer in enumerate(net.layers):
        d = layer.to_dict()
        for name, value in layer.params().items():
            d[name] = {"array": f"{i}.{name}"}
            arrays[f"{i}.{name}"] = value
        if isinstance(layer, MinMax) and layer.state.initialized:
            for name in ("running_min", "running_max"):
                d[name] = {"array": f"{i}.{name}"}
                arrays[f"{i}.{name}"] = np.asarray(getattr(layer.state, name))
        layers.append(d)
    meta = net.to_dict()
    meta["layers"] = layers
    buf = io.BytesIO()
    np.savez(buf, __model__=np.array(json.dumps(meta)), **arrays)
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def import_npz(path) -> Network:
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["__model__"]))
        for d in meta["layers"]:
            for key, value in list(d.items()):
                if isinstance(value, dict) and "array" in value:
                    arr = z[value["array"]]
                    d[key] = {"shape": list(arr.shape), "data": arr.ravel().tolist()}
    return Network([layer_from_dict(d) for d in meta["layers"]], meta["input_shape"],
                   meta["num_classes"], meta.get("seed"))
