"""Offline centralized least squares over all tasks at once."""

from __future__ import annotations

from typing import Dict, Iterable, Sequence

import numpy as np

from .linalg import pinv


def offline_ls(tasks: Sequence) -> np.ndarray:
    """Min-norm least-squares fit of the vertically stacked system.

    ``tasks`` is any sequence of objects with ``A`` and ``y``; leading batch
    axes are kept.
    """
    if not tasks:
        raise ValueError("offline_ls needs at least one task")
    A = np.concatenate([np.asarray(d.A, dtype=np.float64) for d in tasks], axis=-2)
    y = np.concatenate([np.asarray(d.y, dtype=np.float64) for d in tasks], axis=-1)
    return (pinv(A) @ y[..., None])[..., 0]


def offline_ls_prefixes(tasks: Sequence, checkpoints: Iterable[int]) -> Dict[int, np.ndarray]:
    """``offline_ls(tasks[:T])`` for every ``T`` in ``checkpoints`` in one sweep.

    The stacked system ``[A | y]`` is folded task by task into a triangular
    factor with at most ``p + 1`` rows. The min-norm solution depends on the
    data only through ``A^T A`` and ``A^T y``, which the fold preserves, so
    the pseudoinverse of the small factor gives the same estimate.
    """
    wanted = sorted(set(int(c) for c in checkpoints))
    if not wanted or wanted[0] < 1 or wanted[-1] > len(tasks):
        raise ValueError("checkpoints must lie in 1..len(tasks)")
    p = tasks[0].A.shape[-1]
    folded = None
    out = {}
    for T, d in enumerate(tasks[: wanted[-1]], start=1):
        block = np.concatenate([np.asarray(d.A, dtype=np.float64), np.asarray(d.y, dtype=np.float64)[..., None]], axis=-1)
        stacked = block if folded is None else np.concatenate([folded, block], axis=-2)
        folded = np.linalg.qr(stacked, mode="r") if stacked.shape[-2] > p + 1 else stacked
        if T in wanted:
            R, rhs = folded[..., :p], folded[..., p]
            out[T] = (pinv(R) @ rhs[..., None])[..., 0]
    return out
