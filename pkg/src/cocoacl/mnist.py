"""MNIST ingestion for the domain-incremental odd/even experiment."""

from __future__ import annotations

import gzip
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np

from .linalg import _as_generator

# Each task holds one even and one odd digit.
TASK_PAIRS: Tuple[Tuple[int, int], ...] = ((0, 1), (2, 3), (4, 5), (6, 7), (8, 9))
FEATURE_VARIANCE = 0.04
MNIST_ENV = "COCOACL_MNIST_DIR"

_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class MnistError(IOError):
    pass


@dataclass
class LabeledImages:
    x: np.ndarray  # (N, 784) in [0, 1]
    labels: np.ndarray  # (N,) uint8


def task_of_label(label: int) -> int:
    return int(label) // 2


def _open(path: Path):
    if path.exists():
        return open(path, "rb")
    gz = path.with_name(path.name + ".gz")
    if gz.exists():
        return gzip.open(gz, "rb")
    raise MnistError(f"MNIST file not found: {path} (or {gz.name})")


def read_idx(path: Path) -> np.ndarray:
    """Parse an IDX file (big-endian magic, dims, raw unsigned bytes)."""
    path = Path(path)
    with _open(path) as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    if len(raw) < 4:
        raise MnistError(f"truncated IDX header in {path}")
    zero, dtype_code, ndim = struct.unpack(">HBB", raw[:4])
    if zero != 0 or dtype_code != 0x08:
        raise MnistError(f"unsupported IDX magic in {path}")
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise MnistError(f"truncated IDX header in {path}")
    dims = struct.unpack(">" + "I" * ndim, raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header != count:
        raise MnistError(f"IDX payload size mismatch in {path}: header says {count} bytes, found {len(raw) - header}")
    return np.frombuffer(raw, dtype=np.uint8, offset=header).reshape(dims)


def load_split(directory, split: str) -> LabeledImages:
    directory = Path(directory)
    img_name, lab_name = _FILES[split]
    images = read_idx(directory / img_name)
    labels = read_idx(directory / lab_name)
    if images.ndim != 3 or labels.ndim != 1 or images.shape[0] != labels.shape[0]:
        raise MnistError(f"inconsistent MNIST {split} files in {directory}")
    return LabeledImages(images.reshape(images.shape[0], -1).astype(np.float64) / 255.0, labels.copy())


def load_mnist(path=None) -> Dict[str, LabeledImages]:
    """Load the train and test splits from a directory of IDX files.

    Falls back to the ``COCOACL_MNIST_DIR`` environment variable.
    """
    if path is None:
        path = os.environ.get(MNIST_ENV)
    if not path:
        raise MnistError(f"no MNIST directory given and {MNIST_ENV} is unset")
    return {split: load_split(path, split) for split in _FILES}


def sample_feature_bank(d: int, p: int, rng) -> np.ndarray:
    return np.sqrt(FEATURE_VARIANCE) * _as_generator(rng).standard_normal((d, p))


def random_features(x: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Cosine random features ``cos(Z^T x)``; ``x`` may be a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != Z.shape[0]:
        raise ValueError(f"input has {x.shape[-1]} entries but the feature bank expects {Z.shape[0]}")
    return np.cos(x @ Z)


def select_task_samples(
    labels: np.ndarray, pair: Tuple[int, int], count: int, rng, balanced: bool = True
) -> np.ndarray:
    """Indices of ``count`` samples from one digit pair, drawn without replacement."""
    gen = _as_generator(rng)
    pools = [np.flatnonzero(labels == d) for d in pair]
    if not balanced:
        pool = np.concatenate(pools)
        return np.sort(gen.choice(pool, size=min(count, pool.size), replace=False))
    half = [count // 2, count - count // 2]
    # Move any shortfall of one digit onto the other.
    for a, b in ((0, 1), (1, 0)):
        short = half[a] - pools[a].size
        if short > 0:
            half[a] -= short
            half[b] += short
    picks: List[np.ndarray] = []
    for pool, k in zip(pools, half):
        picks.append(gen.choice(pool, size=min(k, pool.size), replace=False))
    return np.sort(np.concatenate(picks))
