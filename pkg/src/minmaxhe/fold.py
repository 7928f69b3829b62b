"""Network surgery: activation swaps, Min-Max folding and the division-free rewrite."""

from __future__ import annotations

import numpy as np

from .approx import ChebyshevSeries
from .errors import (IndexNotActivation, NoDownstreamLayer, UnfoldableTopology,
                     Uninitialized)
from .layers import (Activation, AvgPool, Conv2D, Dense, Flatten, GlobalAvgPool,
                     GlobalSumPool, MinMax, Network, PolyActivation, SumPool,
                     minmax_scale)


def swap_activations(net: Network, plan: dict) -> Network:
    """Replace the Activation layers named in ``plan`` (layer index -> series)."""
    out = net.copy()
    for idx, series in plan.items():
        idx = int(idx)
        if not 0 <= idx < len(out.layers) or not isinstance(out.layers[idx], Activation):
            raise IndexNotActivation(f"layer {idx} is not an activation layer")
        if not isinstance(series, ChebyshevSeries):
            series = ChebyshevSeries.from_dict(series)
        out.layers[idx] = PolyActivation(series)
    return out


def uniform_plan(net: Network, series: ChebyshevSeries) -> dict:
    return {i: series for i in net.indices_of(Activation)}


def hybrid_plan(net: Network, series_in_order) -> dict:
    """Assign ``series_in_order[k]`` to the k-th activation layer."""
    idx = net.indices_of(Activation)
    series_in_order = list(series_in_order)
    if len(series_in_order) != len(idx):
        raise ValueError(f"{len(idx)} activation layers but {len(series_in_order)} series given")
    return dict(zip(idx, series_in_order))


def plan_from_json(net: Network, d: dict) -> dict:
    """Plan file: ``{"<layer index>": series, ..., "default": series}``.

    ``default`` (optional) covers every activation not listed explicitly.
    """
    plan = {int(k): ChebyshevSeries.from_dict(v) for k, v in d.items() if k != "default"}
    if "default" in d:
        fallback = ChebyshevSeries.from_dict(d["default"])
        for i in net.indices_of(Activation):
            plan.setdefault(i, fallback)
    return plan


def fold_minmax(net: Network) -> Network:
    """Absorb every inference-mode Min-Max layer into the dense/conv layer before it."""
    out = net.copy()
    layers = []
    for i, layer in enumerate(out.layers):
        if not isinstance(layer, MinMax):
            layers.append(layer)
            continue
        prev = layers[-1] if layers else None
        if not isinstance(prev, (Dense, Conv2D)):
            raise UnfoldableTopology(f"Min-Max layer {i} does not follow a dense or conv layer")
        st = layer.state
        if not st.initialized:
            raise Uninitialized(f"Min-Max layer {i} has no running statistics")
        slope, offset = minmax_scale(st, st.running_min, st.running_max)
        n_out = prev.b.shape[0]
        slope = np.broadcast_to(slope, (n_out,))
        offset = np.broadcast_to(offset, (n_out,))
        if isinstance(prev, Dense):
            prev.W = prev.W * slope[:, None]
        else:
            prev.kernels = prev.kernels * slope[:, None, None, None]
        prev.b = slope * prev.b + offset
    return Network(layers, out.input_shape, out.num_classes, out.seed)


_HOMOGENEOUS = (AvgPool, SumPool, GlobalAvgPool, GlobalSumPool, Flatten)


def divfree_rewrite(net: Network) -> Network:
    """Turn average pooling into sum pooling.

    The 1/window factor of a local pool is pushed into the weights of the next
    dense/conv layer. A pool with nothing but pooling after it is terminal and
    keeps the extra factor, which leaves the argmax unchanged.
    """
    if net.indices_of(Activation):
        raise ValueError("swap activations for polynomials before the division-free rewrite")
    out = net.copy()
    shapes = out.shapes()
    for i, layer in enumerate(out.layers):
        if isinstance(layer, AvgPool):
            factor = 1.0 / (layer.k * layer.k)
            out.layers[i] = SumPool(layer.k, layer.stride)
        elif isinstance(layer, GlobalAvgPool):
            _, h, w = shapes[i]
            factor = 1.0 / (h * w)
            out.layers[i] = GlobalSumPool()
        else:
            continue
        target = None
        for j in range(i + 1, len(out.layers)):
            nxt = out.layers[j]
            if isinstance(nxt, (Dense, Conv2D)):
                target = nxt
                break
            if not isinstance(nxt, _HOMOGENEOUS):
                raise NoDownstreamLayer(
                    f"pool {i} feeds {nxt.kind} layer {j} before any dense/conv layer")
        if target is None:
            continue
        if isinstance(target, Dense):
            target.W = target.W * factor
        else:
            target.kernels = target.kernels * factor
    return Network(out.layers, out.input_shape, out.num_classes, out.seed)
