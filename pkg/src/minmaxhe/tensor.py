"""Dense float64 tensor helpers.

Tensors are plain ``numpy.ndarray`` objects of dtype float64 in C order. The
functions here add the validation the rest of the package relies on (shape
checks, finiteness) plus the convolution and pooling kernels shared by the
layers.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidAxis, NonFinite, ShapeMismatch

DTYPE = np.float64


def check_finite(t: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(t)):
        raise NonFinite(f"{what} contains NaN or Inf")
    return t


def create(shape: Sequence[int], data: Iterable[float]) -> np.ndarray:
    """Build a tensor of ``shape`` from row-major ``data`` (copied)."""
    shape = tuple(int(s) for s in shape)
    if any(s <= 0 for s in shape):
        raise ShapeMismatch(f"dimensions must be positive, got {shape}")
    flat = np.array(list(data) if not isinstance(data, np.ndarray) else data,
                    dtype=DTYPE).ravel()
    if flat.size != int(np.prod(shape)):
        raise ShapeMismatch(f"{flat.size} values cannot fill shape {shape}")
    check_finite(flat, "data")
    return flat.reshape(shape).copy()


def as_tensor(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=DTYPE)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeMismatch(f"matmul needs rank-2 operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"inner dimensions differ: {a.shape} x {b.shape}")
    return check_finite(a @ b, "matmul result")


def _normalize_axes(axes, ndim: int) -> tuple[int, ...]:
    if axes is None:
        return tuple(range(ndim))
    if isinstance(axes, (int, np.integer)):
        axes = (axes,)
    out = []
    for ax in axes:
        if not -ndim <= ax < ndim:
            raise InvalidAxis(f"axis {ax} out of range for rank {ndim}")
        out.append(ax % ndim)
    return tuple(sorted(set(out)))


def reduce_extrema(t: np.ndarray, axes=None) -> tuple[np.ndarray, np.ndarray]:
    """Minima and maxima of ``t`` over ``axes`` (all axes when None)."""
    ax = _normalize_axes(axes, t.ndim)
    return np.min(t, axis=ax), np.max(t, axis=ax)


# -- convolution -------------------------------------------------------------

def conv_output_size(size: int, k: int, stride: int, padding: int) -> int:
    return (size + 2 * padding - k) // stride + 1


def _windows(x: np.ndarray, kh: int, kw: int, stride: int) -> np.ndarray:
    # (N, C, Ho, Wo, kh, kw) view
    return sliding_window_view(x, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]


def conv2d(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray,
           stride: int = 1, padding: int = 0):
    """Cross-correlation of ``x`` (N,C,H,W) with ``kernels`` (O,C,kh,kw).

    Returns the output (N,O,Ho,Wo) and the padded input needed by
    :func:`conv2d_backward`.
    """
    if x.ndim != 4 or x.shape[1] != kernels.shape[1]:
        raise ShapeMismatch(f"conv input {x.shape} incompatible with kernels {kernels.shape}")
    _, _, kh, kw = kernels.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    if xp.shape[2] < kh or xp.shape[3] < kw:
        raise ShapeMismatch(f"kernel {kh}x{kw} larger than padded input {xp.shape[2:]}")
    win = _windows(xp, kh, kw, stride)
    out = np.tensordot(win, kernels, axes=([1, 4, 5], [1, 2, 3]))  # N,Ho,Wo,O
    out = out.transpose(0, 3, 1, 2) + bias[None, :, None, None]
    return np.ascontiguousarray(out), xp


def conv2d_backward(grad_out: np.ndarray, xp: np.ndarray, kernels: np.ndarray,
                    stride: int, padding: int):
    """Gradients of :func:`conv2d` w.r.t. input, kernels and bias."""
    _, _, kh, kw = kernels.shape
    _, _, ho, wo = grad_out.shape
    win = _windows(xp, kh, kw, stride)
    g_k = np.tensordot(grad_out, win, axes=([0, 2, 3], [0, 2, 3]))  # O,C,kh,kw
    g_b = grad_out.sum(axis=(0, 2, 3))
    cols = np.tensordot(grad_out, kernels, axes=([1], [0]))  # N,Ho,Wo,C,kh,kw
    cols = cols.transpose(0, 3, 1, 2, 4, 5)
    g_xp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            g_xp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += cols[..., i, j]
    if padding:
        g_xp = g_xp[:, :, padding:-padding, padding:-padding]
    return np.ascontiguousarray(g_xp), g_k, g_b


# -- pooling -----------------------------------------------------------------

def pool_sum(x: np.ndarray, k: int, stride: int) -> np.ndarray:
    if x.ndim != 4:
        raise ShapeMismatch(f"pooling expects (N,C,H,W), got {x.shape}")
    if x.shape[2] < k or x.shape[3] < k:
        raise ShapeMismatch(f"pool window {k} larger than input {x.shape[2:]}")
    return _windows(x, k, k, stride).sum(axis=(4, 5))


def pool_sum_backward(grad_out: np.ndarray, in_shape: tuple, k: int, stride: int) -> np.ndarray:
    g = np.zeros(in_shape, dtype=DTYPE)
    _, _, ho, wo = grad_out.shape
    for i in range(k):
        for j in range(k):
            g[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += grad_out
    return g
