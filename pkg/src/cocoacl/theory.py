"""Closed-form expected generalization error of continual CoCoA.

All weight matrices in these expressions are block-scaled identities (one
scalar per node block), so the evaluators work with per-block scalars and
per-block Gram matrices of the task parameters instead of p x p matrices.

A coefficient of ``+inf`` is a legitimate value (local systems at the
interpolation threshold); any expression touching one returns ``math.inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .cocoa import Partition
from .linalg import _as_generator, pinv

INF = math.inf
LIMIT_MARGIN = 1e-12


class DegenerateParameters(ValueError):
    """Raised when a closed form is undefined for the given dimensions."""


def is_divergent(n_t: int, p_k: int) -> bool:
    return n_t - 1 <= p_k <= n_t + 1


def coeffs(n_t: int, p_k: int):
    """Return ``(r, gamma)`` for one (task, node) pair; gamma may be ``inf``."""
    if n_t < 1 or p_k < 1:
        raise ValueError("n_t and p_k must be >= 1")
    lo, hi = min(n_t, p_k), max(n_t, p_k)
    r = lo / p_k
    gamma = INF if is_divergent(n_t, p_k) else lo / (hi - lo - 1)
    return r, gamma


@dataclass(frozen=True)
class TheoryDims:
    """Coefficient tables for tasks ``1..T`` and nodes ``1..K``.

    ``r[0]`` holds the convention value ``K`` for the virtual task 0.
    """

    n: tuple
    sizes: tuple

    def __post_init__(self):
        object.__setattr__(self, "n", tuple(int(v) for v in self.n))
        object.__setattr__(self, "sizes", tuple(int(v) for v in self.sizes))
        if not self.sizes or any(s < 1 for s in self.sizes) or any(v < 1 for v in self.n):
            raise ValueError("dimensions must be positive")

    @classmethod
    def equal(cls, n: int, p: int, K: int, T: int) -> "TheoryDims":
        return cls((n,) * T, Partition.equal(p, K).sizes)

    @property
    def T(self) -> int:
        return len(self.n)

    @property
    def K(self) -> int:
        return len(self.sizes)

    @property
    def r(self) -> np.ndarray:
        table = np.full((self.T + 1, self.K), float(self.K))
        for t, n_t in enumerate(self.n, start=1):
            table[t] = [coeffs(n_t, pk)[0] for pk in self.sizes]
        return table

    @property
    def gamma(self) -> np.ndarray:
        table = np.full((self.T + 1, self.K), np.nan)
        for t, n_t in enumerate(self.n, start=1):
            table[t] = [coeffs(n_t, pk)[1] for pk in self.sizes]
        return table

    def divergent_upto(self, t: int) -> bool:
        return any(is_divergent(n_t, pk) for n_t in self.n[:t] for pk in self.sizes)

    @property
    def divergent(self) -> bool:
        return self.divergent_upto(self.T)


def h_table(dims: TheoryDims, t: int) -> np.ndarray:
    """Backward recursion for the node weights; row ``tau`` is ``h_tau``.

    Rows run ``0..t+1`` with row ``t+1`` fixed to one (row 0 unused).
    """
    K = dims.K
    r, g = dims.r, dims.gamma
    h = np.ones((t + 2, K))
    for tau in range(t, 0, -1):
        nxt = h[tau + 1]
        cross = np.sum(nxt * g[tau]) - nxt * g[tau]
        h[tau] = (nxt * (K * K + r[tau] * (1 - 2 * K)) + cross) / (K * K)
    return h


def block_gram(ws: Sequence[np.ndarray], partition: Partition) -> np.ndarray:
    """Per-block Gram matrices with a zero vector prepended at index 0.

    Shape ``(K, L+1, L+1)``; entry ``[k, a, b]`` is ``<w_a, w_b>`` on block k.
    """
    W = np.vstack([np.zeros(partition.p)] + [np.asarray(w, dtype=np.float64) for w in ws])
    return np.stack([W[:, s] @ W[:, s].T for s in partition.slices()])


def theorem1_from_gram(gram: np.ndarray, sigma2: Sequence[float], dims: TheoryDims, t: int, T: int) -> float:
    """Expected error ``G_T`` after training on tasks ``1..t`` (any Gram input).

    Because the error is linear in the parameter Gram entries, passing an
    expected Gram matrix yields the error averaged over a parameter model.
    """
    if not 0 <= t <= dims.T:
        raise ValueError(f"t={t} outside 0..{dims.T}")
    if T < 1 or gram.shape[1] < max(t, T) + 1:
        raise ValueError("need parameters for every task up to max(t, T)")
    if len(sigma2) < max(t, T):
        raise ValueError("need a noise variance for every task up to max(t, T)")
    if dims.divergent_upto(t):
        return INF
    K = dims.K
    s2 = np.asarray(sigma2, dtype=np.float64)
    r, g = dims.r, dims.gamma
    h = h_table(dims, t)
    idx = np.arange(1, T + 1)
    diag = np.einsum("kaa->ka", gram)  # (K, L+1)

    # Weight on ||w_i||^2 plus the test noise.
    per_i = np.einsum("k,ki->i", h[1], diag[:, idx]) + s2[:T]

    # j-sum shrink factors r_j/K * prod_{l=j+1}^{tau-1} (1 - r_l/K).
    for tau in range(1, t + 1):
        nxt = h[tau + 1]
        cross = np.sum(nxt * g[tau]) - nxt * g[tau]
        R = (nxt * r[tau] + cross) / K**2
        Qc = (nxt * r[tau] * (K - 1) - cross) / K**2
        noise = s2[tau - 1] * np.sum(g[tau] * nxt) / K**2

        dist = diag[:, [tau]] - 2 * gram[:, tau, idx] + diag[:, idx]  # (K, T)
        per_i += np.einsum("k,ki->i", R, dist) + noise

        shrink = np.ones(K)
        for j in range(tau - 1, -1, -1):
            Q = r[j] / K * shrink * Qc
            inner = gram[:, tau, [j]] - gram[:, tau, idx] - gram[:, idx, j] + diag[:, idx]
            per_i += 2 * np.einsum("k,ki->i", Q, inner)
            shrink = shrink * (1 - r[j] / K)
    return float(np.mean(per_i))


def theorem1_error(
    w_true: Sequence[np.ndarray], sigma2: Sequence[float], dims: TheoryDims, t: int, T: Optional[int] = None
) -> float:
    """Expected generalization error over tasks ``1..T`` of the estimate after task ``t``.

    Valid when every local block is overparameterized by at least two
    (``p_k > n_t + 1``) or when a single round is run per task.
    """
    T = len(w_true) if T is None else T
    return theorem1_from_gram(block_gram(w_true, Partition(dims.sizes)), sigma2, dims, t, T)


def _dot(a, b) -> float:
    return float(np.dot(a, b))


@dataclass(frozen=True)
class ScalarCoeffs:
    r: float
    gamma: float
    h: float
    b: float

    @property
    def divergent(self) -> bool:
        return math.isinf(self.gamma)


def h_equal(n: int, p: int, K: int) -> ScalarCoeffs:
    pk = Partition.equal(p, K).sizes[0]
    r, gamma = coeffs(n, pk)
    h = (K * K + (1 - 2 * K) * r + (K - 1) * gamma) / (K * K)
    return ScalarCoeffs(r, gamma, h, 1 - r / K)


def corollary_equal_dims(
    w_true: Sequence[np.ndarray], sigma2: Sequence[float], n: int, p: int, K: int, t: int, T: Optional[int] = None
) -> float:
    """Equal-dimension form: every task has ``n`` samples, every node ``p/K`` unknowns."""
    T = len(w_true) if T is None else T
    if not 0 <= t <= len(w_true) or T > len(w_true):
        raise ValueError("not enough task parameters for (t, T)")
    c = h_equal(n, p, K)
    if t > 0 and c.divergent:
        return INF
    r, gamma, h, b = c.r, c.gamma, c.h, c.b
    ws = [np.asarray(w, dtype=np.float64) for w in w_true]
    total = 0.0
    for i in range(T):
        wi = ws[i]
        acc = _dot(wi, wi) * h**t + sigma2[i]
        for tau in range(1, t + 1):
            wt = ws[tau - 1]
            d = wt - wi
            ht = h ** (t - tau)
            acc += _dot(d, d) * (r + (K - 1) * gamma) / K**2 * ht
            acc += sigma2[tau - 1] * gamma / K * ht
            jsum = sum(b ** (tau - j - 1) * _dot(d, ws[j - 1] - wi) for j in range(1, tau))
            acc += 2 * ht * (r - gamma) * (K - 1) / K**2 * (r / K) * jsum
            acc -= 2 * (K - 1) / K**2 * b ** (tau - 1) * (r - gamma) * ht * _dot(d, wi)
        total += acc
    return total / T


def centralized_error(w_true: Sequence[np.ndarray], sigma2: float, n: int, p: int, T: Optional[int] = None) -> float:
    """Single-node continual least squares, reported as ``G_T - sigma^2``."""
    T = len(w_true) if T is None else T
    if p <= n + 1:
        return INF
    r = n / p
    ws = [np.asarray(w, dtype=np.float64) for w in w_true[:T]]
    first = (1 - r) ** T / T * sum(_dot(w, w) for w in ws)
    second = sum(
        r * (1 - r) ** (T - tau) * sum(_dot(ws[tau - 1] - wi, ws[tau - 1] - wi) for wi in ws)
        for tau in range(1, T + 1)
    ) / T
    noise = p * sigma2 / (p - n - 1) * (1 - (1 - r) ** T)
    return first + second + noise


def theorem2_error(w_star: np.ndarray, sigma2: float, dims: TheoryDims, T: Optional[int] = None) -> float:
    """All tasks share one parameter vector and one noise level."""
    T = dims.T if T is None else T
    if dims.divergent_upto(T):
        return INF
    K = dims.K
    h = h_table(dims, T)
    g = dims.gamma
    part = Partition(dims.sizes)
    weighted = sum(h[1, k] * _dot(blk, blk) for k, blk in enumerate(part.split(np.asarray(w_star, dtype=np.float64))))
    noise_sum = sum(np.sum(g[tau] * h[tau + 1]) for tau in range(1, T + 1))
    return weighted + sigma2 * (K * K + noise_sum) / (K * K)


def zero_error_conditions(dims: TheoryDims) -> List[bool]:
    """Per task: does either dimension condition for a vanishing error hold?"""
    K = dims.K
    pmin, pmax = min(dims.sizes), max(dims.sizes)
    c = (K - 1) / (2 * K - 1)
    return [(n_t < pmin - c * pmax - 1) or (n_t > pmax + c * pmin + 1) for n_t in dims.n]


@dataclass(frozen=True)
class PsiCoeffs:
    psi0: float
    psi1: float
    psi2: float
    psi3: float
    psi4: float


def psi_coeffs(n: int, p: int, K: int, T: int, tol: float = 1e-12) -> PsiCoeffs:
    """Coefficients splitting the averaged error into noise and similarity terms."""
    if T < 1:
        raise ValueError("T must be >= 1")
    c = h_equal(n, p, K)
    if c.divergent:
        return PsiCoeffs(INF, INF, INF, INF, INF)
    r, gamma, h, b = c.r, c.gamma, c.h, c.b
    if abs(1 - h) <= tol:
        raise DegenerateParameters(f"h = 1 for n={n}, p={p}, K={K}")
    geo_h = (1 - h**T) / (1 - h)
    psi0 = 1 + gamma / K * geo_h
    psi1 = h**T
    psi2 = (r + (K - 1) * gamma) / K**2 * (T - 1) / T * geo_h
    # With one node the (K-1) prefactor removes both terms.
    if K == 1:
        return PsiCoeffs(psi0, psi1, psi2, 0.0, 0.0)
    if abs(b - h) <= tol:
        raise DegenerateParameters(f"b = h for n={n}, p={p}, K={K}")
    lead = 2 * (K - 1) * (r - gamma) / K**2
    psi3 = lead * (T - 1) / T * (h**T - b**T) / (h - b)
    psi4 = lead * (T - 2) / T * (geo_h - (b**T - h**T) / (b - h))
    return PsiCoeffs(psi0, psi1, psi2, psi3, psi4)


def corollary4_error(p: int, p_shared: int, energy: float, sigma2: float, n: int, K: int, T: int) -> float:
    """Error averaged over random task parameters with ``p_shared`` common entries."""
    psi = psi_coeffs(n, p, K, T)
    if math.isinf(psi.psi0):
        return INF
    frac = (p - p_shared) / p
    return psi.psi0 * sigma2 + (psi.psi1 + frac * (2 * psi.psi2 + psi.psi3 + psi.psi4)) * energy


def limit_error_infT(p: int, p_shared: int, energy: float, sigma2: float, n: int, K: int, margin: float = LIMIT_MARGIN) -> float:
    c = h_equal(n, p, K)
    if c.divergent or abs(c.h) >= 1 - margin:
        return INF
    frac = (p - p_shared) / p
    return (1 + c.gamma / K / (1 - c.h)) * sigma2 + 2 * c.r / K / (1 - c.h) * frac * energy


def expected_gram_shared(p: int, p_shared: int, T: int, partition: Partition, energy: float = 1.0) -> np.ndarray:
    """Expected per-block Gram matrix for parameters sharing their first ``p_shared`` entries.

    Covers both the normalized generator and the random-energy model: each
    coordinate has second moment ``energy / p`` and task tails are uncorrelated.
    """
    G = np.zeros((partition.K, T + 1, T + 1))
    for k, sl in enumerate(partition.slices()):
        size = sl.stop - sl.start
        shared = max(0, min(sl.stop, p_shared) - sl.start)
        G[k, 1:, 1:] = shared * energy / p
        G[k, np.arange(1, T + 1), np.arange(1, T + 1)] = size * energy / p
    return G


@dataclass
class IdentityReport:
    name: str
    estimate: np.ndarray
    expected: np.ndarray

    def max_diag_rel_error(self) -> float:
        d = np.diag(self.expected)
        return float(np.max(np.abs(np.diag(self.estimate) - d) / np.abs(d)))

    def max_offdiag_abs_error(self) -> float:
        off = ~np.eye(self.expected.shape[0], dtype=bool)
        if not off.any():
            return 0.0
        return float(np.max(np.abs(self.estimate - self.expected)[off]))


def gaussian_identity_stats(n: int, p_k: int, trials: int, rng, chunk: int = 5000) -> List[IdentityReport]:
    """Monte-Carlo estimates of four standard-Gaussian matrix expectations."""
    if is_divergent(n, p_k):
        raise DegenerateParameters(f"p_k={p_k} within one of n={n}")
    gen = _as_generator(rng)
    r, gamma = coeffs(n, p_k)
    sums = {"ATA": np.zeros((p_k, p_k)), "ApA": np.zeros((p_k, p_k)), "AATp": np.zeros((n, n)), "AiT_AATp_Ai": np.zeros((p_k, p_k))}
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        A = gen.standard_normal((b, n, p_k))
        Ai = gen.standard_normal((b, n, p_k))
        At = np.swapaxes(A, -1, -2)
        gram_p = pinv(A @ At)
        sums["ATA"] += np.sum(At @ A, axis=0)
        sums["ApA"] += np.sum(pinv(A) @ A, axis=0)
        sums["AATp"] += np.sum(gram_p, axis=0)
        sums["AiT_AATp_Ai"] += np.sum(np.swapaxes(Ai, -1, -2) @ gram_p @ Ai, axis=0)
        done += b
    eye_p, eye_n = np.eye(p_k), np.eye(n)
    return [
        IdentityReport("E[A^T A] / n", sums["ATA"] / trials / n, eye_p),
        IdentityReport("E[A^+ A]", sums["ApA"] / trials, r * eye_p),
        IdentityReport("n E[(A A^T)^+]", sums["AATp"] / trials * n, gamma * eye_n),
        IdentityReport("E[A_i^T (A A^T)^+ A_i]", sums["AiT_AATp_Ai"] / trials, gamma * eye_p),
    ]
