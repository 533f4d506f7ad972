"""Synthetic continual-learning task streams.

Each task is a noisy linear model ``y_t = A_t w_t + z_t``. Task parameters
share their first ``p_shared`` coordinates, which is how task similarity is
controlled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .linalg import _as_generator, sample_gaussian, sample_toeplitz_rows, toeplitz_factor

REGRESSOR_MODELS = ("iid_gaussian", "toeplitz")
PARAM_MODELS = ("normalized", "random_energy")


@dataclass(frozen=True)
class TaskSequenceSpec:
    p: int
    p_shared: int
    n: Tuple[int, ...]
    sigma2: Tuple[float, ...]
    regressor_model: str = "iid_gaussian"
    eps: float = 0.0
    param_model: str = "normalized"
    energy: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "sigma2", tuple(float(v) for v in self.sigma2))
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if not 0 <= self.p_shared <= self.p:
            raise ValueError(f"p_shared must lie in [0, {self.p}], got {self.p_shared}")
        if len(self.n) < 1 or len(self.n) != len(self.sigma2):
            raise ValueError("n and sigma2 must be nonempty lists of equal length T")
        if any(v < 1 for v in self.n):
            raise ValueError("every n_t must be >= 1")
        if any(v < 0 for v in self.sigma2):
            raise ValueError("noise variances must be nonnegative")
        if self.regressor_model not in REGRESSOR_MODELS:
            raise ValueError(f"unknown regressor model {self.regressor_model!r}")
        if self.regressor_model == "toeplitz" and not 0.0 <= self.eps < 1.0:
            raise ValueError(f"eps must lie in [0, 1), got {self.eps}")
        if self.param_model not in PARAM_MODELS:
            raise ValueError(f"unknown parameter model {self.param_model!r}")
        if self.energy < 0:
            raise ValueError("energy must be nonnegative")

    @property
    def T(self) -> int:
        return len(self.n)

    @classmethod
    def uniform(cls, p: int, p_shared: int, n: int, sigma2: float, T: int, **kw) -> "TaskSequenceSpec":
        return cls(p=p, p_shared=p_shared, n=(n,) * T, sigma2=(sigma2,) * T, **kw)


@dataclass
class TaskData:
    t: int
    A: np.ndarray
    y: np.ndarray
    w_true: np.ndarray
    sigma2: float
    noise: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.A.shape[-2]


def _rescale(v: np.ndarray, target_sq: float) -> np.ndarray:
    norm_sq = float(v @ v)
    if v.size == 0 or target_sq == 0.0:
        return np.zeros_like(v)
    return v * np.sqrt(target_sq / norm_sq)


def generate_parameters(spec: TaskSequenceSpec, rng) -> List[np.ndarray]:
    """Draw ``w_1 .. w_T`` with a common head of length ``p_shared``."""
    gen = _as_generator(rng)
    p, ps = spec.p, spec.p_shared
    if spec.param_model == "normalized":
        head = _rescale(gen.standard_normal(ps), ps / p)
        tails = [_rescale(gen.standard_normal(p - ps), (p - ps) / p) for _ in range(spec.T)]
    else:
        scale = np.sqrt(spec.energy / p)
        head = scale * gen.standard_normal(ps)
        tails = [scale * gen.standard_normal(p - ps) for _ in range(spec.T)]
    return [np.concatenate([head, tail]) for tail in tails]


def _sample_regressors(spec: TaskSequenceSpec, rows: int, gen, factor) -> np.ndarray:
    if spec.regressor_model == "toeplitz":
        return sample_toeplitz_rows(rows, spec.p, spec.eps, gen, factor=factor)
    return sample_gaussian(rows, spec.p, gen)


def generate_task_data(spec: TaskSequenceSpec, w_true: Sequence[np.ndarray], rng) -> List[TaskData]:
    if len(w_true) != spec.T:
        raise ValueError(f"expected {spec.T} parameter vectors, got {len(w_true)}")
    gen = _as_generator(rng)
    factor = toeplitz_factor(spec.p, spec.eps) if spec.regressor_model == "toeplitz" else None
    out = []
    for t, (n_t, s2, w) in enumerate(zip(spec.n, spec.sigma2, w_true), start=1):
        A = _sample_regressors(spec, n_t, gen, factor)
        z = np.sqrt(s2) * gen.standard_normal(n_t)
        out.append(TaskData(t=t, A=A, y=A @ w + z, w_true=np.asarray(w), sigma2=s2, noise=z))
    return out


def sample_test_point(w_true: np.ndarray, sigma2: float, rng, size: Optional[int] = None):
    """A fresh sample ``(a_new, y_new)`` for one task; ``size`` draws a batch."""
    gen = _as_generator(rng)
    p = w_true.shape[0]
    shape = (p,) if size is None else (size, p)
    a = gen.standard_normal(shape)
    z = np.sqrt(sigma2) * gen.standard_normal(() if size is None else (size,))
    return a, a @ w_true + z
