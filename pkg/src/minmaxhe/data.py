"""IDX (MNIST) and CIFAR-10 binary readers, one-hot encoding and splitting."""

from __future__ import annotations

import gzip
import os
import struct

import numpy as np

from .errors import BadMagic, IOFailure, LabelOutOfRange, Truncated

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def _read_bytes(path) -> bytes:
    try:
        opener = gzip.open if str(path).endswith(".gz") else open
        with opener(path, "rb") as f:
            return f.read()
    except OSError as exc:
        raise IOFailure(f"cannot read {path}: {exc}") from exc


def _parse_idx(raw: bytes, magic: int, ndims: int, path) -> tuple:
    header = 4 + 4 * ndims
    if len(raw) < 4:
        raise Truncated(f"{path}: missing magic number")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise BadMagic(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    if len(raw) < header:
        raise Truncated(f"{path}: header cut short")
    dims = struct.unpack(f">{ndims}I", raw[4:header])
    size = int(np.prod(dims))
    if len(raw) - header < size:
        raise Truncated(f"{path}: header declares {size} bytes, file holds {len(raw) - header}")
    body = np.frombuffer(raw, dtype=np.uint8, count=size, offset=header)
    return dims, body


def load_idx_images(path) -> np.ndarray:
    """Images as float64 (N, 1, H, W) scaled to [0, 1]."""
    (n, h, w), body = _parse_idx(_read_bytes(path), IDX_IMAGES_MAGIC, 3, path)
    return body.reshape(n, 1, h, w).astype(np.float64) / 255.0


def load_idx_labels(path, classes: int = 10) -> np.ndarray:
    (n,), body = _parse_idx(_read_bytes(path), IDX_LABELS_MAGIC, 1, path)
    labels = body.astype(np.int64)
    if labels.size and labels.max() >= classes:
        raise LabelOutOfRange(f"{path}: label {labels.max()} outside {classes} classes")
    return labels


def write_idx_images(path, images: np.ndarray) -> None:
    """Write uint8 images (N, H, W) as an IDX3 file."""
    images = np.asarray(images, dtype=np.uint8)
    n, h, w = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, n, h, w))
        f.write(images.tobytes())


def write_idx_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABELS_MAGIC, labels.size))
        f.write(labels.tobytes())


def _find(directory, stem):
    for name in (stem, stem + ".gz", stem.replace("-idx", ".idx")):
        p = os.path.join(directory, name)
        if os.path.exists(p):
            return p
    raise IOFailure(f"{stem} not found in {directory}")


def load_mnist(directory, split: str = "train"):
    """``(images, labels)`` for the ``train`` or ``test`` split in ``directory``."""
    img, lab = MNIST_FILES[split]
    return (load_idx_images(_find(directory, img)),
            load_idx_labels(_find(directory, lab), 10))


def one_hot(labels, classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.size and (labels.min() < 0 or labels.max() >= classes):
        raise LabelOutOfRange(f"labels must lie in [0, {classes})")
    out = np.zeros((labels.size, classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def train_val_split(n: int, val_fraction: float, seed: int):
    """Index arrays ``(train_idx, val_idx)``; same seed, same partition."""
    perm = np.random.default_rng(seed).permutation(n)
    n_val = int(round(n * val_fraction))
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


CIFAR_RECORD = 1 + 3 * 32 * 32


def load_cifar10_batch(path):
    """Images (N, 3, 32, 32) in [0, 1] and labels from a CIFAR-10 binary batch."""
    raw = _read_bytes(path)
    if len(raw) % CIFAR_RECORD:
        raise Truncated(f"{path}: size {len(raw)} is not a multiple of {CIFAR_RECORD}")
    rec = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = rec[:, 0].astype(np.int64)
    if labels.size and labels.max() >= 10:
        raise LabelOutOfRange(f"{path}: label {labels.max()} outside 10 classes")
    images = rec[:, 1:].reshape(-1, 3, 32, 32).astype(np.float64) / 255.0
    return images, labels
