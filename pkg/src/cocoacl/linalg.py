"""Dense linear algebra and seeded random-matrix sampling.

Matrices are plain ``numpy.ndarray`` objects in float64. Every routine here
accepts optional leading batch dimensions, so a stack of independent trials
can be pushed through one call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.linalg import toeplitz

StreamId = Union[int, Tuple[int, ...]]


class LinAlgError(RuntimeError):
    """Raised when a decomposition fails instead of returning garbage."""


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream keyed by ``(seed, stream)``.

    Streams are derived with :class:`numpy.random.SeedSequence` spawn keys, so
    trial ``i`` always sees the same numbers no matter which worker or in
    which order it runs.
    """

    seed: int
    stream: StreamId = 0

    def generator(self) -> np.random.Generator:
        key = self.stream if isinstance(self.stream, tuple) else (self.stream,)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        key = self.stream if isinstance(self.stream, tuple) else (self.stream,)
        return RngStream(self.seed, tuple(key) + (int(index),))


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return np.random.default_rng(rng)


def default_rtol(shape: Tuple[int, ...]) -> float:
    return max(shape[-2], shape[-1]) * np.finfo(np.float64).eps


def pinv(m: np.ndarray, rel_tol: float = 0.0) -> np.ndarray:
    """Moore-Penrose pseudoinverse through the SVD.

    Singular values below ``rel_tol * s_max`` are treated as zero; ``rel_tol=0``
    selects ``max(rows, cols) * eps``. Works on stacks of matrices.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim < 2 or m.shape[-1] == 0 or m.shape[-2] == 0:
        raise ValueError(f"pinv needs a nonempty matrix, got shape {m.shape}")
    if rel_tol < 0:
        raise ValueError("rel_tol must be nonnegative")
    if not np.all(np.isfinite(m)):
        raise LinAlgError("pinv input contains non-finite entries")
    tol = rel_tol if rel_tol > 0 else default_rtol(m.shape)
    try:
        u, s, vt = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise LinAlgError(f"SVD did not converge for shape {m.shape}") from exc
    cutoff = tol * s[..., :1]
    inv_s = np.zeros_like(s)
    keep = s > cutoff
    inv_s[keep] = 1.0 / s[keep]
    return np.swapaxes(vt, -1, -2) @ (inv_s[..., :, None] * np.swapaxes(u, -1, -2))


def sample_gaussian(rows: int, cols: int, rng, batch: Tuple[int, ...] = ()) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    return _as_generator(rng).standard_normal(tuple(batch) + (rows, cols))


def toeplitz_covariance(p: int, eps: float) -> np.ndarray:
    return toeplitz(eps ** np.arange(p, dtype=np.float64))


def toeplitz_factor(p: int, eps: float) -> np.ndarray:
    """Return ``L`` with ``L @ L.T`` equal to the Toeplitz covariance.

    Cholesky first; if the matrix is numerically semidefinite the factor comes
    from an eigendecomposition with negative eigenvalues clipped to zero.
    """
    if not 0.0 <= eps < 1.0:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    cov = toeplitz_covariance(p, eps)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        pass
    try:
        vals, vecs = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as exc:
        raise LinAlgError(f"could not factor Toeplitz covariance (p={p}, eps={eps})") from exc
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample_toeplitz_rows(
    rows: int, p: int, eps: float, rng, batch: Tuple[int, ...] = (), factor: np.ndarray | None = None
) -> np.ndarray:
    """Rows drawn i.i.d. from N(0, S) with S Toeplitz, first row ``eps**k``."""
    if factor is None:
        factor = toeplitz_factor(p, eps)
    g = sample_gaussian(rows, p, rng, batch)
    return g @ factor.T
