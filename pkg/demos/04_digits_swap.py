# Baseline 1 vs baseline 2 on a small dataset
#
# Trains a small MLP with and without Min-Max on scikit-learn's 8x8 digits
# (scikit-learn is only needed for this script), then swaps every ELU for
# a degree-3 polynomial and compares the accuracy drop.

import numpy as np
from sklearn.datasets import load_digits

from minmaxhe import (ELU, TrainConfig, build_network, evaluate_accuracy, fit,
                      fit_chebyshev, reference_config, swap_activations, uniform_plan)
from minmaxhe.data import one_hot

digits = load_digits()
x = digits.data / 16.0
y = digits.target
perm = np.random.default_rng(0).permutation(len(y))
tr, te = perm[:1400], perm[1400:]

cfg = reference_config("mlp_minmax")
series = fit_chebyshev(ELU, 3, (-2, 2))

for label, use_minmax in (("plain", False), ("min-max", True)):
    net = build_network(cfg, seed=0, minmax=use_minmax)
    net, _ = fit(net, (x[tr], one_hot(y[tr], 10)), TrainConfig(32, 30, 0), log=None)
    base = evaluate_accuracy(net, (x[te], y[te]))
    swapped = evaluate_accuracy(swap_activations(net, uniform_plan(net, series)), (x[te], y[te]))
    print(f"{label:8s} baseline {base:.3f}  with polynomial {swapped:.3f}")
