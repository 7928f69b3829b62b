"""Exit criteria. Each test records one PASS/FAIL line, shown in the terminal summary.

Criteria 5-7 need the MNIST IDX files: point MNIST_DIR at a directory holding
train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte and
t10k-labels-idx1-ubyte (optionally .gz). Trained models are cached under
MINMAXHE_CACHE (default: pytest's cache dir) so reruns skip training.
"""

import os
import time

import numpy as np
import pytest

import conftest
from minmaxhe import tensor as T
from minmaxhe.approx import ELU, RELU, fit_chebyshev, fit_residual, max_error
from minmaxhe.circuit import depth_report
from minmaxhe.data import load_mnist, one_hot
from minmaxhe.fold import divfree_rewrite, fold_minmax, hybrid_plan, swap_activations, uniform_plan
from minmaxhe.layers import (PER_FEATURE_MAP, PER_TENSOR, Activation, AvgPool, Conv2D, Dense,
                             Flatten, GlobalAvgPool, GlobalSumPool, MinMax, MinMaxState,
                             Network, PolyActivation, SumPool, minmax_apply,
                             minmax_forward_train)
from minmaxhe.model_io import build_network, load_model, reference_config, save_model
from minmaxhe.train import TrainConfig, evaluate_accuracy, fit

from netgen import random_conv_minmax_net
from oracles import central_diff

SEED = 2019
EPOCHS = 5
BATCH = 64


def record(n, title, ok, detail=""):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip()
    conftest.ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


# 1 ---------------------------------------------------------------------------

def test_c1_fold_equivalence():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(50):
        net = random_conv_minmax_net(rng)
        folded = fold_minmax(net)
        assert not folded.indices_of(MinMax)
        x = rng.normal(size=(100,) + net.input_shape) * rng.uniform(0.1, 10)
        a, b = net.forward(x), folded.forward(x)
        worst = max(worst, float(np.max(np.abs(b - a) / (np.abs(a) + 1e-12))))
    elapsed = time.perf_counter() - t0
    record(1, "fold equivalence", worst < 1e-6 and elapsed < 60,
           f"max rel err {worst:.2e} (< 1e-6), {elapsed:.1f}s (< 60s)")


# 2 ---------------------------------------------------------------------------

def _rel(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a) + np.linalg.norm(b), 1e-30)


def _gradcheck(layer, x, rng, frozen=None):
    y, cache = layer.forward(x, "train")
    R = rng.normal(size=y.shape)
    g_in, g_par = layer.backward(cache, R)
    if frozen is None:
        f = lambda v: float(np.sum(R * layer.forward(v, "train")[0]))
    else:
        f = lambda v: float(np.sum(R * minmax_apply(layer.state, v, *frozen)))
    errs = [_rel(g_in, central_diff(f, x, h=1e-5))]
    for name, value in layer.params().items():
        def fp(v, name=name):
            old = getattr(layer, name)
            setattr(layer, name, v)
            try:
                return float(np.sum(R * layer.forward(x, "train")[0]))
            finally:
                setattr(layer, name, old)
        errs.append(_rel(g_par[name], central_diff(fp, value.copy(), h=1e-5)))
    return max(errs)


def test_c2_gradient_checks():
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    img = lambda: rng.normal(size=(2, 3, 6, 6))
    relu_x = rng.normal(size=(3, 6))
    relu_x[np.abs(relu_x) < 1e-3] = 0.3
    mm_t = MinMax(MinMaxState(-3, 3, axis_policy=PER_TENSOR))
    mm_c = MinMax(MinMaxState(-2, 2, axis_policy=PER_FEATURE_MAP))
    x_t, x_c = rng.normal(size=(5, 4)) * 4, img()
    cases = {
        "dense": (Dense(rng.normal(size=(4, 3)), rng.normal(size=4)), rng.normal(size=(5, 3)), None),
        "conv2d": (Conv2D(rng.normal(size=(2, 3, 3, 3)), rng.normal(size=2), 1, 1), img(), None),
        "conv2d-stride2": (Conv2D(rng.normal(size=(2, 3, 2, 2)), rng.normal(size=2), 2, 0), img(), None),
        "avgpool": (AvgPool(2), img(), None),
        "sumpool": (SumPool(2), img(), None),
        "global_avgpool": (GlobalAvgPool(), img(), None),
        "global_sumpool": (GlobalSumPool(), img(), None),
        "flatten": (Flatten(), img(), None),
        "relu": (Activation(RELU), relu_x, None),
        "elu": (Activation(ELU), rng.normal(size=(3, 6)), None),
        "poly": (PolyActivation(fit_chebyshev(ELU, 6, (-3, 3))), rng.normal(size=(3, 6)) * 2, None),
        "minmax-tensor": (mm_t, x_t, T.reduce_extrema(x_t)),
        "minmax-channel": (mm_c, x_c, T.reduce_extrema(x_c, (0, 2, 3))),
    }
    errs = {k: _gradcheck(layer, x, rng, fr) for k, (layer, x, fr) in cases.items()}
    elapsed = time.perf_counter() - t0
    worst = max(errs, key=errs.get)
    record(2, "gradient checks", errs[worst] < 1e-4 and elapsed < 60,
           f"{len(errs)} layer kinds, worst {worst} rel err {errs[worst]:.2e} (< 1e-4), {elapsed:.1f}s")


# 3 ---------------------------------------------------------------------------

def test_c3_minmax_range_invariant():
    rng = np.random.default_rng(SEED)
    worst = 0.0
    for r in (1.0, 2.0, 3.0):
        for i in range(1000):
            policy = PER_FEATURE_MAP if i % 2 else PER_TENSOR
            shape = (int(rng.integers(1, 9)), int(rng.integers(1, 5)),
                     int(rng.integers(2, 5)), int(rng.integers(2, 5)))
            x = rng.normal(loc=rng.normal(scale=20), scale=rng.uniform(1e-3, 100), size=shape)
            out, _ = minmax_forward_train(MinMaxState(-r, r, axis_policy=policy), x)
            axes = (0, 2, 3) if policy == PER_FEATURE_MAP else None
            lo, hi = T.reduce_extrema(out, axes)
            worst = max(worst, float(np.max(np.abs(lo + r))), float(np.max(np.abs(hi - r))))
    record(3, "Min-Max range invariant", worst <= 1e-12,
           f"3000 batches, max |extremum - bound| {worst:.1e} (<= 1e-12)")


# 4 ---------------------------------------------------------------------------

def test_c4_approximation_shape():
    relu_err = max_error(fit_chebyshev(RELU, 3, (-3, 3)), RELU, -0.5, 0.5)
    elu_err = max_error(fit_chebyshev(ELU, 3, (-3, 3)), ELU, -0.5, 0.5)
    monotone = True
    for kind in (RELU, ELU):
        for r in (1, 2, 3):
            res = [fit_residual(fit_chebyshev(kind, n, (-r, r)), kind) for n in range(2, 7)]
            # odd ReLU terms leave the residual unchanged up to rounding
            monotone &= all(b <= a * (1 + 1e-12) for a, b in zip(res, res[1:]))
    record(4, "approximation shape", relu_err > elu_err and monotone,
           f"|x|<=0.5 max err ReLU {relu_err:.4f} > ELU {elu_err:.4f}; residual non-increasing 2..6: {monotone}")


# 8 ---------------------------------------------------------------------------

def test_c8_hybrid_depth():
    rng = np.random.default_rng(SEED)
    layers = []
    for _ in range(3):
        layers += [Dense(rng.normal(size=(4, 4)), rng.normal(size=4)), Activation(ELU)]
    net = Network(layers + [Dense(rng.normal(size=(3, 4)), rng.normal(size=3))], (4,), 3)
    s5, s2 = fit_chebyshev(ELU, 5, (-2, 2)), fit_chebyshev(ELU, 2, (-2, 2))
    hybrid = depth_report(swap_activations(net, hybrid_plan(net, [s5, s2, s2])))
    uniform = depth_report(swap_activations(net, uniform_plan(net, s5)))
    per = [c.ct_ct_depth for c in hybrid.per_layer if c.ct_ct_depth]
    record(8, "hybrid-degree depth", per == [3, 1, 1] and hybrid.total_ct_ct_depth == 5
           and uniform.total_ct_ct_depth == 9,
           f"hybrid {per} total {hybrid.total_ct_ct_depth} (5), uniform {uniform.total_ct_ct_depth} (9)")


# 5-7: desk-scale MNIST -------------------------------------------------------

def _cache_dir(request):
    d = os.environ.get("MINMAXHE_CACHE") or str(request.config.cache.mkdir("minmaxhe-models"))
    os.makedirs(d, exist_ok=True)
    return d


def _trained(path, mnist, minmax):
    if os.path.exists(path):
        return load_model(path)
    (x, y), _ = mnist
    net = build_network(reference_config("lenet5_like"), SEED, minmax=minmax)
    net, _ = fit(net, (x, one_hot(y, 10)), TrainConfig(BATCH, EPOCHS, SEED), log=None)
    save_model(net, path)
    return net


@pytest.fixture(scope="module")
def mnist(mnist_dir):
    return load_mnist(mnist_dir, "train"), load_mnist(mnist_dir, "test")


@pytest.fixture(scope="module")
def experiment(mnist, request):
    d = _cache_dir(request)
    tag = f"lenet5_elu_s{SEED}_e{EPOCHS}_b{BATCH}"
    base2 = _trained(os.path.join(d, f"{tag}_minmax3.json"), mnist, True)
    base1 = _trained(os.path.join(d, f"{tag}_plain.json"), mnist, False)
    series = fit_chebyshev(ELU, 3, (-2, 2))
    test = mnist[1]
    out = {}
    for name, net in (("base2", base2), ("base1", base1)):
        poly = swap_activations(net, uniform_plan(net, series))
        out[name] = (net, poly, evaluate_accuracy(net, test), evaluate_accuracy(poly, test))
    return out


@pytest.mark.slow
def test_c5_divfree_argmax(experiment, mnist):
    _, poly, _, _ = experiment["base2"]
    deployable = fold_minmax(poly)
    df = divfree_rewrite(deployable)
    x = mnist[1][0]
    same = int(np.count_nonzero(df.predict(x) == deployable.predict(x)))
    record(5, "division-free argmax preservation", same == x.shape[0],
           f"{same}/{x.shape[0]} identical predictions")


@pytest.mark.slow
def test_c6_mnist_minmax_drop(experiment):
    _, _, acc, poly_acc = experiment["base2"]
    drop = 100 * (acc - poly_acc)
    record(6, "MNIST baseline 2 + degree-3 ELU swap", acc >= 0.97 and drop <= 1.0,
           f"baseline 2 {100 * acc:.2f}% (>= 97), swapped {100 * poly_acc:.2f}%, drop {drop:.2f} pt (<= 1.0)")


@pytest.mark.slow
def test_c7_no_minmax_contrast(experiment):
    _, _, acc2, poly2 = experiment["base2"]
    _, _, acc1, poly1 = experiment["base1"]
    drop2, drop1 = 100 * (acc2 - poly2), 100 * (acc1 - poly1)
    record(7, "no-Min-Max degradation contrast", drop1 >= drop2 + 5.0,
           f"baseline 1 {100 * acc1:.2f}% -> {100 * poly1:.2f}% (drop {drop1:.2f} pt) vs "
           f"Min-Max drop {drop2:.2f} pt; need >= {drop2 + 5:.2f}")
