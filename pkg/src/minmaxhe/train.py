"""Loss, Adadelta, the mini-batch training loop and accuracy evaluation."""

from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataset, InvalidOneHot, ShapeMismatch
from .layers import Network


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def softmax_crossentropy(logits: np.ndarray, onehot: np.ndarray):
    """Mean categorical cross-entropy of softmax(logits) and its gradient."""
    if logits.ndim != 2 or logits.shape != onehot.shape:
        raise ShapeMismatch(f"logits {logits.shape} and targets {onehot.shape} differ")
    if not (np.all((onehot == 0) | (onehot == 1)) and np.all(onehot.sum(axis=1) == 1)):
        raise InvalidOneHot("each target row needs exactly one 1")
    n = logits.shape[0]
    z = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=1))
    loss = float(np.mean(log_norm - (z * onehot).sum(axis=1)))
    grad = (np.exp(z - log_norm[:, None]) - onehot) / n
    return loss, grad


@dataclass
class AdadeltaState:
    """Running averages for one parameter tensor."""

    rho: float = 0.95
    epsilon: float = 1e-6
    sq_grad: np.ndarray = None
    sq_update: np.ndarray = None

    @classmethod
    def like(cls, param: np.ndarray, rho: float = 0.95, epsilon: float = 1e-6):
        return cls(rho, epsilon, np.zeros_like(param), np.zeros_like(param))


def adadelta_step(state: AdadeltaState, params: np.ndarray, grads: np.ndarray):
    """One Adadelta update. Returns ``(new_params, new_state)``."""
    if params.shape != grads.shape or state.sq_grad.shape != params.shape:
        raise ShapeMismatch(f"parameter {params.shape} and gradient {grads.shape} differ")
    rho, eps = state.rho, state.epsilon
    sq_grad = rho * state.sq_grad + (1.0 - rho) * grads * grads
    delta = -np.sqrt(state.sq_update + eps) / np.sqrt(sq_grad + eps) * grads
    sq_update = rho * state.sq_update + (1.0 - rho) * delta * delta
    return params + delta, AdadeltaState(rho, eps, sq_grad, sq_update)


@dataclass
class TrainConfig:
    batch_size: int = 64
    epochs: int = 1
    seed: int = 0
    shuffle: bool = True
    rho: float = 0.95
    epsilon: float = 1e-6

    def __post_init__(self):
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")


def init_optimizer(net: Network, rho: float = 0.95, epsilon: float = 1e-6) -> dict:
    return {(i, name): AdadeltaState.like(p, rho, epsilon) for i, name, p in net.parameters()}


def train_epoch(net: Network, data, cfg: TrainConfig, opt: dict, epoch: int = 0):
    """One pass over ``data = (inputs, onehot)``; updates ``net`` and ``opt`` in place.

    Returns ``(net, opt, mean_loss)``. The permutation for epoch ``e`` is drawn
    from a generator seeded with ``(cfg.seed, e)``.
    """
    x, y = data
    n = x.shape[0]
    if n == 0:
        raise EmptyDataset("no training samples")
    if cfg.batch_size > n:
        raise ValueError(f"batch size {cfg.batch_size} exceeds dataset size {n}")
    order = np.arange(n)
    if cfg.shuffle:
        order = np.random.default_rng([cfg.seed, epoch]).permutation(n)
    total, count = 0.0, 0
    for start in range(0, n, cfg.batch_size):
        idx = order[start:start + cfg.batch_size]
        logits, caches = net.forward_train(x[idx])
        loss, grad = softmax_crossentropy(logits.reshape(len(idx), -1), y[idx])
        grads = net.backward(caches, grad.reshape(logits.shape))
        for i, gp in grads.items():
            layer = net.layers[i]
            for name, g in gp.items():
                new, opt[(i, name)] = adadelta_step(opt[(i, name)], getattr(layer, name), g)
                setattr(layer, name, new)
        total += loss * len(idx)
        count += len(idx)
    return net, opt, total / count


def evaluate_accuracy(net: Network, data, batch_size: int = 500) -> float:
    """Fraction of samples whose argmax logit (lowest index on ties) matches the label."""
    x, labels = data
    labels = np.asarray(labels)
    if labels.ndim == 2:
        labels = labels.argmax(axis=1)
    if x.shape[0] == 0:
        raise EmptyDataset("no samples to evaluate")
    pred = net.predict(x, batch_size)
    return float(np.count_nonzero(pred == labels)) / x.shape[0]


def fit(net: Network, train, cfg: TrainConfig, val=None, log=sys.stdout):
    """Train for ``cfg.epochs`` epochs, printing ``epoch,<n>,loss,<v>,val_acc,<v>`` lines."""
    opt = init_optimizer(net, cfg.rho, cfg.epsilon)
    history = []
    for epoch in range(1, cfg.epochs + 1):
        net, opt, loss = train_epoch(net, train, cfg, opt, epoch)
        acc = evaluate_accuracy(net, val) if val is not None else float("nan")
        history.append((epoch, loss, acc))
        if log is not None:
            print(f"epoch,{epoch},loss,{loss:.6f},val_acc,{acc:.6f}", file=log, flush=True)
    return net, history
