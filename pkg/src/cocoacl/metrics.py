"""Empirical errors of an estimate and the Monte-Carlo trial harness."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .cocoa import CocoaState, Partition
from .linalg import RngStream
from .tasks import TaskData, TaskSequenceSpec, generate_parameters, generate_task_data, sample_test_point


def training_error(w_hat: np.ndarray, A: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Half mean squared residual ``||A w - y||^2 / (2 n)`` (batched)."""
    if A.shape[-1] != w_hat.shape[-1] or A.shape[-2] != y.shape[-1]:
        raise ValueError("dimension mismatch between estimate, regressors and targets")
    resid = (A @ w_hat[..., None])[..., 0] - y
    return np.sum(resid**2, axis=-1) / (2 * A.shape[-2])


def forgetting(w_hat: np.ndarray, tasks: Sequence[TaskData]) -> np.ndarray:
    """Average training error of one estimate over the tasks seen so far."""
    if not tasks:
        raise ValueError("forgetting needs at least one task")
    return sum(training_error(w_hat, d.A, d.y) for d in tasks) / len(tasks)


def generalization_exact(
    w_hat: np.ndarray,
    w_true: Sequence[np.ndarray],
    sigma2: Sequence[float],
    T: Optional[int] = None,
    cov: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Expected squared error on a fresh sample, averaged over tasks ``1..T``.

    ``cov`` is the regressor covariance; identity when omitted.
    """
    T = len(w_true) if T is None else T
    if T > len(w_true) or T > len(sigma2) or T < 1:
        raise ValueError("need T parameter vectors and noise variances")
    total = 0.0
    for w, s2 in zip(w_true[:T], sigma2[:T]):
        d = w_hat - w
        quad = np.sum(d * d, axis=-1) if cov is None else np.sum(d * (d @ cov), axis=-1)
        total = total + quad + s2
    return total / T


def generalization_sampled(
    w_hat: np.ndarray, w_true: Sequence[np.ndarray], sigma2: Sequence[float], rng, samples: int
) -> tuple:
    """Test-sample estimate of the generalization error; returns ``(mean, stderr)``."""
    per_task = []
    gen = rng if isinstance(rng, np.random.Generator) else RngStream(int(rng)).generator()
    for w, s2 in zip(w_true, sigma2):
        a, y = sample_test_point(w, s2, gen, size=samples)
        per_task.append((a @ w_hat - y) ** 2)
    sq = np.mean(per_task, axis=0)
    return float(sq.mean()), float(sq.std(ddof=1) / np.sqrt(samples))


@dataclass
class McSummary:
    mean: float
    stderr: float
    trials: int
    nonfinite: int = 0
    coords: Dict[str, object] = field(default_factory=dict)

    @classmethod
    def from_values(cls, values: np.ndarray, drop_nonfinite: bool = False, **coords) -> "McSummary":
        values = np.asarray(values, dtype=np.float64)
        finite = np.isfinite(values)
        bad = int(values.size - finite.sum())
        if drop_nonfinite:
            values = values[finite]
        n = values.size
        if n == 0:
            return cls(float("nan"), float("nan"), 0, bad, coords)
        mean = float(values.mean())
        stderr = float(values.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
        return cls(mean, stderr, n, bad, coords)


@dataclass
class TrialResult:
    estimate: np.ndarray
    per_task_training_error: List[float]
    forgetting: float
    generalization: float
    seed: int
    stream: tuple


@dataclass
class MonteCarloResult:
    generalization: McSummary
    forgetting: McSummary
    values: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)


def _trial_stream(seed: int, trial: int) -> RngStream:
    return RngStream(seed, (1, trial))


def parameter_stream(seed: int) -> RngStream:
    return RngStream(seed, (0,))


def _draw_trial(spec, w_fixed, trial, seed, resample):
    gen = _trial_stream(seed, trial).generator()
    ws = generate_parameters(spec, gen) if resample else w_fixed
    return ws, generate_task_data(spec, ws, gen)


def run_trial(spec: TaskSequenceSpec, partition: Partition, T_c: int, trial: int, seed: int,
              w_true: Optional[Sequence[np.ndarray]] = None) -> TrialResult:
    """One complete pass over the task sequence for a single trial index."""
    resample = w_true is None
    ws, data = _draw_trial(spec, w_true, trial, seed, resample)
    state = CocoaState.zeros(partition)
    for d in data:
        state.run_task(d, T_c)
    w = state.w_hat
    errs = [float(training_error(w, d.A, d.y)) for d in data]
    return TrialResult(w, errs, float(np.mean(errs)), float(generalization_exact(w, ws, spec.sigma2)),
                       seed, _trial_stream(seed, trial).stream)


def run_monte_carlo(
    spec: TaskSequenceSpec,
    partition: Partition,
    T_c: int,
    trials: int,
    seed: int,
    w_true: Optional[Sequence[np.ndarray]] = None,
    resample_parameters: bool = False,
    t: Optional[int] = None,
    drop_nonfinite: bool = False,
    chunk: int = 512,
    estimator: str = "cocoa",
) -> MonteCarloResult:
    """Average errors over independent trials, each with fresh training data.

    Trial ``i`` draws from its own stream ``(seed, (1, i))``, so results do not
    depend on ``chunk`` or execution order. Parameters are fixed across trials
    (drawn once from ``(seed, (0,))`` unless given) or, with
    ``resample_parameters``, redrawn inside every trial. ``t`` stops training
    after that many tasks while still scoring all T tasks. ``estimator``
    selects CoCoA or the offline least-squares benchmark.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    t = spec.T if t is None else t
    if not 0 <= t <= spec.T:
        raise ValueError("t must lie in 0..T")
    if w_true is None and not resample_parameters:
        w_true = generate_parameters(spec, parameter_stream(seed))
    cov = None
    if spec.regressor_model == "toeplitz":
        from .linalg import toeplitz_covariance

        cov = toeplitz_covariance(spec.p, spec.eps)

    gen_vals, forg_vals = [], []
    for start in range(0, trials, chunk):
        idx = range(start, min(trials, start + chunk))
        draws = [_draw_trial(spec, w_true, i, seed, resample_parameters) for i in idx]
        ws = [np.stack([d[0][k] for d in draws]) for k in range(spec.T)]  # per task (B, p)
        tasks = [
            TaskData(k + 1, np.stack([d[1][k].A for d in draws]), np.stack([d[1][k].y for d in draws]), ws[k], spec.sigma2[k])
            for k in range(spec.T)
        ]
        if estimator == "cocoa":
            state = CocoaState.zeros(partition, batch=(len(idx),))
            for d in tasks[:t]:
                state.run_task(d, T_c)
            w = state.w_hat
        elif estimator == "offline_ls":
            from .baseline import offline_ls

            w = offline_ls(tasks[:t]) if t > 0 else np.zeros((len(idx), spec.p))
        else:
            raise ValueError(f"unknown estimator {estimator!r}")
        with np.errstate(invalid="ignore", over="ignore"):
            gen_vals.append(generalization_exact(w, ws, spec.sigma2, cov=cov))
            forg_vals.append(forgetting(w, tasks[:t]) if t > 0 else np.full(len(idx), np.nan))
        nonfinite = ~np.all(np.isfinite(w), axis=-1)
        gen_vals[-1] = np.where(nonfinite, np.inf, gen_vals[-1])
    g = np.concatenate(gen_vals)
    f = np.concatenate(forg_vals)
    return MonteCarloResult(
        McSummary.from_values(g, drop_nonfinite),
        McSummary.from_values(f, drop_nonfinite),
        {"generalization": g, "forgetting": f},
    )
