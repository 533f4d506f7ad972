"""CoCoA over a feature-partitioned network, run task after task.

The p model coordinates are split into K contiguous blocks, one per node.
For each task the network starts from the previous task's estimate and runs
``T_c`` rounds of: average the per-node predictions, solve every local
least-squares correction with the block pseudoinverse, and update.

The subproblem parameter is fixed at ``sigma' = phi * K``; ``phi`` cancels out
of every update, so it has no knob here. Arrays may carry leading batch axes
(independent trials); the partition always acts on the last axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .linalg import pinv


def _matvec(m: np.ndarray, x: np.ndarray) -> np.ndarray:
    return (m @ x[..., None])[..., 0]


@dataclass(frozen=True)
class Partition:
    sizes: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError(f"partition sizes must be positive, got {self.sizes}")
        object.__setattr__(self, "sizes", sizes)

    @classmethod
    def equal(cls, p: int, K: int) -> "Partition":
        if K < 1 or p % K:
            raise ValueError(f"p={p} is not divisible by K={K}; pass sizes explicitly")
        return cls((p // K,) * K)

    @property
    def K(self) -> int:
        return len(self.sizes)

    @property
    def p(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> tuple:
        return tuple(np.cumsum((0,) + self.sizes[:-1]).tolist())

    def slices(self) -> List[slice]:
        return [slice(o, o + s) for o, s in zip(self.offsets, self.sizes)]

    def split(self, a: np.ndarray) -> List[np.ndarray]:
        """Column blocks of ``a`` (or entry blocks of a vector)."""
        if a.shape[-1] != self.p:
            raise ValueError(f"expected last dimension {self.p}, got {a.shape[-1]}")
        return [a[..., s] for s in self.slices()]


def block_pinvs(A: np.ndarray, partition: Partition) -> List[np.ndarray]:
    return [pinv(block) for block in partition.split(A)]


def build_abar(A: np.ndarray, partition: Partition, pinvs: Optional[Sequence[np.ndarray]] = None) -> np.ndarray:
    """Stack of scaled block pseudoinverses, shape ``(..., p, n)``."""
    if pinvs is None:
        pinvs = block_pinvs(A, partition)
    return np.concatenate(list(pinvs), axis=-2) / partition.K


def one_step_closed_form(w_prev: np.ndarray, A: np.ndarray, y: np.ndarray, partition: Partition) -> np.ndarray:
    """``P w_prev + Abar y`` with ``P = I - Abar A``; equals one CoCoA round."""
    abar = build_abar(A, partition)
    return w_prev - _matvec(abar, _matvec(A, w_prev)) + _matvec(abar, y)


@dataclass
class CocoaState:
    partition: Partition
    w_hat: np.ndarray
    v: List[np.ndarray] = field(default_factory=list)
    task_index: int = 0
    iter_count: int = 0
    _A: Optional[List[np.ndarray]] = field(default=None, repr=False)
    _pinv: Optional[List[np.ndarray]] = field(default=None, repr=False)
    _y: Optional[np.ndarray] = field(default=None, repr=False)

    @classmethod
    def zeros(cls, partition: Partition, batch: tuple = ()) -> "CocoaState":
        return cls(partition, np.zeros(tuple(batch) + (partition.p,)))

    def blocks(self) -> List[np.ndarray]:
        return self.partition.split(self.w_hat)

    def init_task(self, data) -> "CocoaState":
        """Load a task's ``(A, y)``; the current estimate carries over."""
        A, y = np.asarray(data.A, dtype=np.float64), np.asarray(data.y, dtype=np.float64)
        if A.shape[-1] != self.partition.p:
            raise ValueError(f"task has {A.shape[-1]} columns, partition covers {self.partition.p}")
        if A.shape[-2] != y.shape[-1]:
            raise ValueError(f"A has {A.shape[-2]} rows but y has {y.shape[-1]} entries")
        K = self.partition.K
        self._A = self.partition.split(A)
        self._pinv = [pinv(a) for a in self._A]
        self._y = y
        batch = np.broadcast_shapes(self.w_hat.shape[:-1], A.shape[:-2], y.shape[:-1])
        self.w_hat = np.broadcast_to(self.w_hat, batch + (A.shape[-1],)).copy()
        self.v = [K * _matvec(a, w) for a, w in zip(self._A, self.blocks())]
        self.task_index = getattr(data, "t", self.task_index + 1)
        self.iter_count = 0
        return self

    def iterate(self) -> "CocoaState":
        if self._A is None:
            raise RuntimeError("init_task must be called before iterate")
        K = self.partition.K
        v_bar = sum(self.v) / K
        residual = self._y - v_bar
        new_v = []
        for sl, a, a_pinv in zip(self.partition.slices(), self._A, self._pinv):
            dw = _matvec(a_pinv, residual) / K
            self.w_hat[..., sl] += dw
            new_v.append(v_bar + K * _matvec(a, dw))
        self.v = new_v
        self.iter_count += 1
        return self

    def run_task(self, data, T_c: int, callback=None) -> "CocoaState":
        """Run ``T_c`` rounds on one task; ``callback(state)`` fires after each."""
        if T_c < 1:
            raise ValueError("T_c must be >= 1")
        self.init_task(data)
        for _ in range(T_c):
            self.iterate()
            if callback is not None:
                callback(self)
        return self

    def prediction(self) -> np.ndarray:
        """The network's current estimate of ``y`` for the loaded task."""
        return sum(self.v) / self.partition.K


def run_sequence(tasks: Sequence, partition: Partition, T_c: int, w_init: Optional[np.ndarray] = None) -> np.ndarray:
    """Train on ``tasks`` in order from ``w_init`` (zero by default)."""
    state = CocoaState(partition, np.zeros(partition.p) if w_init is None else np.array(w_init, dtype=np.float64))
    for data in tasks:
        state.run_task(data, T_c)
    return state.w_hat
