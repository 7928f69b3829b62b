"""Static cost model of an inference network as a leveled-HE arithmetic circuit.

Conventions:

* weights, biases and polynomial coefficients are plaintexts, so dense, conv
  and pooling layers add no ciphertext-ciphertext multiplications;
* a polynomial of degree n costs ceil(log2 n) ciphertext-ciphertext levels
  (powers built by repeated squaring);
* fixed-point encoding multiplies every plaintext by 10**k. The report tracks
  the exponent of the accumulated factor: inputs start at k, a plaintext
  product adds k, and a degree-n polynomial maps an input exponent s to
  n*s + k (its top power times a scaled coefficient).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .approx import power_ladder_depth, to_monomial
from .errors import NotHECompatible
from .layers import (Activation, AvgPool, Conv2D, Dense, GlobalAvgPool, MinMax,
                     Network, PolyActivation)


@dataclass
class LayerCost:
    index: int
    ct_ct_depth: int
    pt_mult_count: int
    scale_exp_delta: int


@dataclass
class CircuitReport:
    per_layer: list = field(default_factory=list)
    total_ct_ct_depth: int = 0
    total_scale_exponent: int = 0

    def to_dict(self) -> dict:
        return {
            "layers": [{"index": c.index, "ct_ct_depth": c.ct_ct_depth,
                        "pt_mult_count": c.pt_mult_count,
                        "scale_exp_delta": c.scale_exp_delta} for c in self.per_layer],
            "total_ct_ct_depth": self.total_ct_ct_depth,
            "total_scale_exponent": self.total_scale_exponent,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def effective_degree(coeffs, rtol: float = 1e-12) -> int:
    """Degree after dropping negligible leading power-basis coefficients."""
    c = np.abs(np.asarray(coeffs, dtype=np.float64))
    if not c.any():
        return 0
    keep = np.nonzero(c > rtol * c.max())[0]
    return int(keep[-1])


def _incompatible(layer) -> str:
    if isinstance(layer, Activation):
        return f"activation {layer.fn.name} needs branching or exponentials"
    if isinstance(layer, MinMax):
        return "min-max layer needs division; fold it first"
    if isinstance(layer, (AvgPool, GlobalAvgPool)):
        return f"{layer.kind} needs division; apply the division-free rewrite"
    return ""


def check_he_compatible(net: Network) -> None:
    bad = [(i, msg) for i, l in enumerate(net.layers) if (msg := _incompatible(l))]
    if bad:
        raise NotHECompatible(bad)


def depth_report(net: Network, fixed_point_k: int = 0) -> CircuitReport:
    check_he_compatible(net)
    k = int(fixed_point_k)
    shapes = net.shapes()
    scale = k
    report = CircuitReport()
    for i, layer in enumerate(net.layers):
        in_shape, out_shape = shapes[i], shapes[i + 1]
        depth, mults, delta = 0, 0, 0
        if isinstance(layer, Dense):
            mults = layer.W.size
            delta = k
        elif isinstance(layer, Conv2D):
            _, ho, wo = out_shape
            mults = layer.kernels.size * ho * wo
            delta = k
        elif isinstance(layer, PolyActivation):
            mono = to_monomial(layer.series)
            n = effective_degree(mono)
            depth = power_ladder_depth(n)
            terms = int(np.count_nonzero(np.abs(mono[1:n + 1]) > 0))
            mults = terms * int(np.prod(in_shape))
            if n >= 1:
                delta = n * scale + k - scale
        scale += delta
        report.per_layer.append(LayerCost(i, depth, mults, delta))
    report.total_ct_ct_depth = sum(c.ct_ct_depth for c in report.per_layer)
    report.total_scale_exponent = scale
    return report
