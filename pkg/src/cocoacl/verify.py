"""Acceptance checks, one function per criterion.

Each check returns a :class:`CheckResult`. ``run_all`` executes them in order
and is what the ``verify`` subcommand calls.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .baseline import offline_ls_prefixes
from .cocoa import CocoaState, Partition, one_step_closed_form
from .linalg import RngStream
from .metrics import forgetting, generalization_exact, parameter_stream, run_monte_carlo, _trial_stream
from .tasks import TaskData, TaskSequenceSpec, generate_parameters, generate_task_data
from .theory import (
    TheoryDims,
    centralized_error,
    coeffs,
    corollary4_error,
    corollary_equal_dims,
    gaussian_identity_stats,
    h_equal,
    limit_error_infT,
    theorem1_error,
    theorem2_error,
    zero_error_conditions,
)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _rel(a: float, b: float) -> float:
    if a == b:
        return 0.0
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def check_coefficients() -> CheckResult:
    r, g = coeffs(15, 20)
    h2 = h_equal(15, 40, 2).h
    h10 = h_equal(15, 40, 10).h
    ok = r == 0.75 and g == 3.75 and h2 == 1.375 and abs(h10 - 0.846) <= 5e-4
    return CheckResult(1, "coefficients", ok, f"r={r} gamma={g} h(K=2)={h2} h(K=10)={h10:.6f}")


def random_theory_configs(count: int, seed: int) -> List[dict]:
    """Configurations with ``p <= 64`` and every block at least 4 away from ``n_t``.

    The margin keeps the per-trial error variance finite so a standard-error
    test is meaningful. Multi-round configs require ``p_k > n_t + 1``.
    """
    rng = RngStream(seed, (7,)).generator()
    out = []
    while len(out) < count:
        K = int(rng.choice([1, 2, 4, 8]))
        pk = int(rng.integers(4, 64 // K + 1))
        p = K * pk
        T = int(rng.integers(1, 5))
        multi = bool(rng.integers(0, 2))
        if multi:
            hi = pk - 4
            if hi < 1:
                continue
            n = [int(rng.integers(1, hi + 1)) for _ in range(T)]
            T_c = int(rng.integers(2, 6))
        else:
            cand = [v for v in range(1, 3 * pk + 8) if abs(v - pk) >= 4]
            n = [int(rng.choice(cand)) for _ in range(T)]
            T_c = 1
        out.append(dict(p=p, K=K, T=T, n=n, T_c=T_c, p_shared=int(rng.integers(0, p + 1)),
                        sigma2=[float(rng.uniform(0, 0.5)) for _ in range(T)], seed=int(rng.integers(0, 2**31))))
    return out


def check_theory_vs_simulation(trials: int = 5000, configs: int = 10, seed: int = 2024) -> CheckResult:
    worst = 0.0
    notes = []
    ok = True
    for cfg in random_theory_configs(configs, seed):
        spec = TaskSequenceSpec(cfg["p"], cfg["p_shared"], tuple(cfg["n"]), tuple(cfg["sigma2"]))
        part = Partition.equal(cfg["p"], cfg["K"])
        ws = generate_parameters(spec, parameter_stream(cfg["seed"]))
        dims = TheoryDims(cfg["n"], part.sizes)
        theory = theorem1_error(ws, spec.sigma2, dims, spec.T, spec.T)
        mc = run_monte_carlo(spec, part, cfg["T_c"], trials, cfg["seed"], w_true=ws).generalization
        z = abs(mc.mean - theory) / mc.stderr if mc.stderr > 0 else (0.0 if mc.mean == theory else math.inf)
        worst = max(worst, z)
        if not z <= 3.0:
            ok = False
            notes.append(f"p={cfg['p']} K={cfg['K']} n={cfg['n']} theory={theory:.5g} mc={mc.mean:.5g}+-{mc.stderr:.2g}")
    detail = f"{configs} configs x {trials} trials, max |z|={worst:.2f}"
    return CheckResult(2, "theory vs simulation", ok, detail + ("; " + "; ".join(notes) if notes else ""))


def check_specialization(instances: int = 20, seed: int = 11) -> CheckResult:
    rng = RngStream(seed, (8,)).generator()
    worst = [0.0, 0.0, 0.0]
    for _ in range(instances):
        K = int(rng.choice([1, 2, 4]))
        pk = int(rng.integers(2, 20))
        p = K * pk
        n = int(rng.integers(1, 40))
        if abs(n - pk) <= 1:
            n = pk + 3
        T = int(rng.integers(1, 6))
        t = int(rng.integers(0, T + 1))
        ws = [rng.standard_normal(p) / math.sqrt(p) for _ in range(T)]
        s2 = float(rng.uniform(0, 0.3))
        dims = TheoryDims.equal(n, p, K, T)
        worst[0] = max(worst[0], _rel(corollary_equal_dims(ws, [s2] * T, n, p, K, t, T),
                                      theorem1_error(ws, [s2] * T, dims, t, T)))
        # Single node, wide model: centralized form
        nc = int(rng.integers(1, max(2, p - 2)))
        if p > nc + 1:
            worst[1] = max(worst[1], _rel(centralized_error(ws, s2, nc, p, T),
                                          corollary_equal_dims(ws, [s2] * T, nc, p, 1, T, T) - s2))
        same = [ws[0]] * T
        worst[2] = max(worst[2], _rel(theorem2_error(ws[0], s2, dims, T), theorem1_error(same, [s2] * T, dims, T, T)))
    ok = all(w <= 1e-10 for w in worst)
    return CheckResult(3, "specialization chain", ok,
                       f"max rel err: corollary {worst[0]:.2e}, centralized {worst[1]:.2e}, theorem2 {worst[2]:.2e}")


def check_one_step(instances: int = 50, seed: int = 12) -> CheckResult:
    rng = RngStream(seed, (9,)).generator()
    worst = 0.0
    for _ in range(instances):
        K = int(rng.integers(1, 6))
        n = int(rng.integers(1, 20))
        sizes = tuple(int(v) for v in rng.integers(n + 2, n + 20, size=K))
        part = Partition(sizes)
        A = rng.standard_normal((n, part.p))
        y = rng.standard_normal(n)
        state = CocoaState(part, rng.standard_normal(part.p))
        state.init_task(TaskData(1, A, y, None, 0.0))
        state.iterate()
        first = state.w_hat.copy()
        for _ in range(99):
            state.iterate()
            worst = max(worst, np.linalg.norm(state.w_hat - first) / np.linalg.norm(first))
    return CheckResult(4, "one-step convergence", worst <= 1e-9, f"max relative drift over 100 rounds {worst:.2e}")


def check_single_round(instances: int = 50, seed: int = 13) -> CheckResult:
    rng = RngStream(seed, (10,)).generator()
    worst = 0.0
    for _ in range(instances):
        K = int(rng.integers(1, 6))
        n = int(rng.integers(1, 25))
        sizes = tuple(int(v) for v in rng.integers(1, 2 * n + 5, size=K))
        part = Partition(sizes)
        A = rng.standard_normal((n, part.p))
        y = rng.standard_normal(n)
        w0 = rng.standard_normal(part.p)
        state = CocoaState(part, w0.copy())
        state.init_task(TaskData(1, A, y, None, 0.0))
        state.iterate()
        oracle = one_step_closed_form(w0, A, y, part)
        worst = max(worst, np.linalg.norm(state.w_hat - oracle) / np.linalg.norm(oracle))
    return CheckResult(5, "single-round oracle", worst <= 1e-10, f"max relative error {worst:.2e}")


def check_divergence(seed: int = 14) -> CheckResult:
    rng = RngStream(seed, (11,)).generator()
    n, p = 15, 40
    w = rng.standard_normal(p)
    w /= np.linalg.norm(w)
    ws = [w] * 200
    g10 = corollary_equal_dims(ws, [0.01] * 200, n, p, 2, 10, 10)
    g40 = corollary_equal_dims(ws, [0.01] * 200, n, p, 2, 40, 40)
    g200 = corollary_equal_dims(ws, [0.0] * 200, n, p, 10, 200, 200)
    ok = g40 > 10 * g10 and g200 < 1e-3
    return CheckResult(6, "divergence detection", ok, f"K=2: G(10)={g10:.3g} G(40)={g40:.3g}; K=10: G(200)={g200:.3g}")


def check_limits() -> CheckResult:
    closed_worst = 0.0
    finite_worst = 0.0
    for p in (2, 8, 32):
        for p_s in (0, p // 2):
            for s2 in (0.0, 0.01):
                n, e = 2 * p, 1.0
                share = (p - p_s) / p * e
                k1 = (1 + p / (p - 1)) * s2 + 2 * share
                kp = (1 + p / (4 * p - 3) / (p - 1)) * s2 + 2 * p / (4 * p - 3) * 2 * share
                for K, ref in ((1, k1), (p, kp)):
                    lim = limit_error_infT(p, p_s, e, s2, n, K)
                    closed_worst = max(closed_worst, _rel(lim, ref))
                    finite_worst = max(finite_worst, _rel(corollary4_error(p, p_s, e, s2, n, K, 10**6), lim))
    ok = closed_worst <= 1e-12 and finite_worst <= 1e-6
    return CheckResult(7, "limit formulas", ok,
                       f"closed forms max rel {closed_worst:.2e} (tol 1e-12); T=1e6 vs limit max rel {finite_worst:.2e} (tol 1e-6)")


def check_gaussian_identities(trials: int = 100_000, seed: int = 15) -> CheckResult:
    diag = off = 0.0
    for i, (n, pk) in enumerate(((8, 20), (20, 8))):
        for rep in gaussian_identity_stats(n, pk, trials, RngStream(seed, (12, i))):
            diag = max(diag, rep.max_diag_rel_error())
            off = max(off, rep.max_offdiag_abs_error())
    return CheckResult(8, "Gaussian identities", diag <= 0.05 and off <= 0.02,
                       f"max diag rel {diag:.4f} (tol 0.05), max offdiag abs {off:.4f} (tol 0.02)")


FIG2_LS_REFERENCE = {1: 0.02, 2: 0.18, 4: 0.22, 8: 0.25, 16: 0.25}


def check_ls_baseline(trials: int = 20, seed: int = 16, p: int = 1024, p_shared: int = 768, n: int = 2048) -> CheckResult:
    Ts = sorted(FIG2_LS_REFERENCE)
    spec = TaskSequenceSpec.uniform(p, p_shared, n, 0.01, Ts[-1])
    ws = generate_parameters(spec, parameter_stream(seed))
    vals = {T: [] for T in Ts}
    for i in range(trials):
        data = generate_task_data(spec, ws, _trial_stream(seed, i).generator())
        for T, w in offline_ls_prefixes(data, Ts).items():
            vals[T].append(float(generalization_exact(w, ws[:T], spec.sigma2[:T])))
    means = {T: float(np.mean(v)) for T, v in vals.items()}
    ok = all(abs(means[T] - FIG2_LS_REFERENCE[T]) <= 0.03 for T in Ts)
    detail = ", ".join(f"T={T}: {means[T]:.4f} (ref {FIG2_LS_REFERENCE[T]})" for T in Ts)
    return CheckResult(9, "offline LS reference", ok, detail)


def check_mnist(p: int = 3000, repeats: int = 100, data_dir: Optional[str] = None, seed: int = 0) -> CheckResult:
    from .experiments import build_config, run_mnist
    from .mnist import MnistError

    cfg = build_config({"experiment": "mnist", "p": p, "repeats": repeats, "seed": seed, "mnist_dir": data_dir})
    try:
        rows = run_mnist(cfg)
    except MnistError as exc:
        return CheckResult(10, "MNIST properties", False, f"data unavailable: {exc}")
    final = {r["task"]: r["error_rate"] for r in rows if r["repetition"] == repeats}
    ok = all(v < 0.5 for v in final.values()) and final[0] < final[max(final)]
    errs = " ".join(f"{k}:{v:.3f}" for k, v in sorted(final.items()))
    return CheckResult(10, "MNIST properties", ok, f"p={p}, final error per task {errs}")


def check_forgetting_limit(seed: int = 17, trials: int = 20, passes: int = 50) -> CheckResult:
    n, p, K, T = 15, 40, 10, 5
    dims = TheoryDims.equal(n, p, K, T)
    if not all(zero_error_conditions(dims)):
        return CheckResult(11, "forgetting limit", False, "configuration violates the zero-error conditions")
    spec = TaskSequenceSpec.uniform(p, p, n, 0.0, T)
    ws = generate_parameters(spec, parameter_stream(seed))
    draws = [generate_task_data(spec, ws, _trial_stream(seed, i).generator()) for i in range(trials)]
    tasks = [TaskData(k + 1, np.stack([d[k].A for d in draws]), np.stack([d[k].y for d in draws]), ws[k], 0.0)
             for k in range(T)]
    state = CocoaState.zeros(Partition.equal(p, K), batch=(trials,))
    first = None
    for rep in range(passes):
        for d in tasks:
            state.run_task(d, 1)
        if rep == 0:
            first = float(np.mean(forgetting(state.w_hat, tasks)))
    last = float(np.mean(forgetting(state.w_hat, tasks)))
    return CheckResult(11, "forgetting limit", last < 0.05 * first,
                       f"first pass {first:.4g}, after {passes} passes {last:.4g}")


CHECKS: Dict[int, Callable[[], CheckResult]] = {
    1: check_coefficients,
    2: check_theory_vs_simulation,
    3: check_specialization,
    4: check_one_step,
    5: check_single_round,
    6: check_divergence,
    7: check_limits,
    8: check_gaussian_identities,
    9: check_ls_baseline,
    10: check_mnist,
    11: check_forgetting_limit,
}


def run_check(number: int, **kwargs) -> CheckResult:
    start = time.perf_counter()
    try:
        res = CHECKS[number](**kwargs)
    except Exception as exc:  # a crash is a failed criterion, not a crashed suite
        res = CheckResult(number, CHECKS[number].__name__, False, f"error: {type(exc).__name__}: {exc}")
    res.seconds = time.perf_counter() - start
    return res


def run_all(only: Optional[Sequence[int]] = None, echo: Callable[[str], None] = print,
            options: Optional[Dict[int, dict]] = None) -> List[CheckResult]:
    results = []
    for number in only or sorted(CHECKS):
        res = run_check(number, **(options or {}).get(number, {}))
        echo(res.line())
        results.append(res)
    return results
