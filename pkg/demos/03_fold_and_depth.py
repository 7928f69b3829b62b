# From a trained-style network to a division-free polynomial circuit
#
# 1. swap activations for polynomials
# 2. fold the (now fixed) Min-Max affine maps into the preceding weights
# 3. replace average pooling by sum pooling
# 4. count multiplicative depth

import numpy as np

from minmaxhe import (ELU, build_network, depth_report, divfree_rewrite,
                      fit_chebyshev, fold_minmax, swap_activations, uniform_plan)

cfg = {
    "input_shape": [1, 12, 12], "num_classes": 3,
    "layers": [
        {"kind": "conv2d", "out_channels": 4, "kernel": 3, "padding": 1},
        {"kind": "minmax", "range": [-2, 2], "momentum": 0.9},
        {"kind": "activation", "fn": "elu"},
        {"kind": "avgpool", "k": 2},
        {"kind": "conv2d", "out_channels": 3, "kernel": 1},
        {"kind": "global_avgpool"},
    ],
}
net = build_network(cfg, seed=3)
rng = np.random.default_rng(3)
x = rng.uniform(size=(32, 1, 12, 12))

# one training-mode pass initializes the running extrema
net.forward_train(x)

poly = swap_activations(net, uniform_plan(net, fit_chebyshev(ELU, 3, (-2, 2))))
folded = fold_minmax(poly)
flat = divfree_rewrite(folded)

a, b = poly.forward(x), folded.forward(x)
print("fold changes logits by at most", np.abs(a - b).max())
# global sum pooling skips the final 1/(H*W), so logits scale but argmax does not
print("same predictions after rewrite:", np.array_equal(folded.predict(x), flat.predict(x)))

for layer in flat.layers:
    print(" ", type(layer).__name__)

print(depth_report(flat, fixed_point_k=3).to_json(indent=1))
