"""Config-driven experiment grids and the MNIST odd/even pipeline.

A config is a flat YAML mapping. ``experiment`` picks a preset whose values
are overridden key by key; unknown keys are rejected. Grid keys (``K``,
``T``, ``p_S``, ``n_t``, ``T_c``, ``eps``, ``sigma2``) accept a scalar or a
list and are swept as a Cartesian product in a fixed order.
"""

from __future__ import annotations

import copy
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import yaml

from . import mnist as mn
from .baseline import offline_ls
from .cocoa import CocoaState, Partition
from .linalg import RngStream
from .metrics import (
    McSummary,
    forgetting,
    generalization_exact,
    parameter_stream,
    run_monte_carlo,
    _trial_stream,
)
from .output import emit
from .tasks import TaskData, TaskSequenceSpec, generate_parameters, generate_task_data
from .theory import TheoryDims, block_gram, expected_gram_shared, theorem1_from_gram

GRID_KEYS = ("K", "T", "p_S", "n_t", "T_c", "eps", "sigma2")
MODES = ("theory", "simulate", "both")
KINDS = ("sweep", "learning_curve", "mnist")
EXPERIMENTS = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig_vs_nt", "fig_tm", "mnist", "custom")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "custom"
    kind: str = "sweep"
    p: int = 64
    grid: Dict[str, list] = field(default_factory=lambda: {
        "K": [1], "T": [1], "p_S": [0], "n_t": [16], "T_c": [1], "eps": [0.0], "sigma2": [0.01]})
    energy: float = 1.0
    param_model: str = "normalized"
    mode: str = "both"
    trials: int = 100
    seed: int = 0
    output: Optional[str] = None
    format: str = "csv"
    parallel: int = 1
    scale: float = 1.0
    estimators: List[str] = field(default_factory=lambda: ["cocoa"])
    repeats: int = 1
    figure: str = ""
    mnist_dir: Optional[str] = None
    test_size: int = 2000
    reshuffle: bool = False

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: unknown id {self.experiment!r}")
        if self.kind not in KINDS:
            raise ConfigError(f"kind: unknown {self.kind!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode: must be one of {MODES}, got {self.mode!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"format: must be csv or json, got {self.format!r}")
        if self.trials < 0:
            raise ConfigError("trials: must be >= 0")
        if self.mode != "theory" and self.trials == 0:
            raise ConfigError("trials: simulation modes need trials >= 1")
        if self.p < 1:
            raise ConfigError("p: must be >= 1")
        if self.param_model not in ("normalized", "random_energy"):
            raise ConfigError(f"param_model: unknown {self.param_model!r}")
        for key in GRID_KEYS:
            if not self.grid.get(key):
                raise ConfigError(f"{key}: grid dimension must be non-empty")
        for est in self.estimators:
            if est not in ("cocoa", "offline_ls"):
                raise ConfigError(f"estimators: unknown estimator {est!r}")
        return self

    def points(self) -> List[Dict[str, Any]]:
        values = [self.grid[k] for k in GRID_KEYS]
        return [dict(zip(GRID_KEYS, combo)) for combo in itertools.product(*values)]


def _pow2(lo: int, hi: int) -> List[int]:
    return [2**k for k in range(lo, hi + 1)]


# Full-scale parameters plus the desk scale used when simulating.
# ``scaled`` names the quantities multiplied by the scale factor.
PRESETS: Dict[str, Dict[str, Any]] = {
    "fig2": dict(figure="generalization vs K for several T, one-shot (n_t=2048, T_c=1)",
                 p=1024, K=_pow2(0, 10), T=[1, 2, 4, 8, 16], p_S=[768], n_t=[2048], T_c=[1], sigma2=[0.01],
                 desk_scale=0.25, desk_K=_pow2(0, 6), scaled=("p", "p_S", "n_t"), trials=100),
    "fig3": dict(figure="generalization vs K for several T, overparameterized (n_t=32, T_c=100)",
                 p=1024, K=_pow2(0, 5), T=[1, 2, 4, 8, 16], p_S=[768], n_t=[32], T_c=[100], sigma2=[0.01],
                 desk_scale=0.25, scaled=("p", "p_S", "n_t"), trials=100),
    "fig4": dict(figure="generalization vs K for several p_S (T=16, T_c=1)",
                 p=1024, K=_pow2(0, 10), T=[16], p_S=[0, 256, 512, 768, 1024], n_t=[2048], T_c=[1], sigma2=[0.01],
                 desk_scale=0.25, desk_K=_pow2(0, 6), scaled=("p", "p_S", "n_t"), trials=100),
    "fig5": dict(figure="generalization vs p_S for several T, K in {4, 16}",
                 p=1024, K=[4, 16], T=[1, 2, 4, 8, 16], p_S=list(range(0, 1025, 128)), n_t=[2048], T_c=[1],
                 sigma2=[0.01], desk_scale=0.25, scaled=("p", "p_S", "n_t"), trials=100),
    "fig6": dict(figure="learning curves under task replay, overparameterized (p=1024, n_t=32)",
                 kind="learning_curve", p=1024, K=[2], T=[16], p_S=[0, 256, 512, 768, 1024], n_t=[32],
                 T_c=[100], sigma2=[0.01], repeats=3, desk_scale=0.25, scaled=("p", "p_S"), trials=20),
    "fig7": dict(figure="learning curves under task replay, underparameterized (p=64, n_t=128)",
                 kind="learning_curve", p=64, K=[2], T=[16], p_S=[0, 16, 32, 48, 64], n_t=[128],
                 T_c=[100], sigma2=[0.01], repeats=3, desk_scale=1.0, scaled=(), trials=20),
    "fig8": dict(figure="generalization vs K under Toeplitz-correlated regressors (T=8)",
                 p=1024, K=_pow2(0, 10), T=[8], p_S=[768], n_t=[2048], T_c=[1], eps=[0.0, 0.2, 0.5, 0.8, 0.95],
                 sigma2=[0.01], desk_scale=0.25, desk_K=_pow2(0, 6), scaled=("p", "p_S", "n_t"), trials=50),
    "fig_vs_nt": dict(figure="generalization vs n_t for T_c in {1, 100} (K=32, p_k=32)",
                      p=1024, K=[32], T=[1, 16], p_S=[512],
                      n_t=[4, 8, 16, 24, 28, 30, 34, 36, 40, 48, 64, 96, 128], T_c=[1, 100], sigma2=[0.01],
                      desk_scale=0.25, scaled=("p", "p_S", "K"), trials=50),
    "fig_tm": dict(figure="expected error vs T under the shared-entries parameter model, with LS benchmark",
                   p=32, K=[1, 2, 4, 8, 16, 32], T=[1, 2, 4, 8, 16, 32, 64, 128], p_S=[24], n_t=[64, 1],
                   T_c=[1], sigma2=[0.01, 1.0], param_model="random_energy", estimators=["cocoa", "offline_ls"],
                   desk_scale=1.0, scaled=(), trials=100),
    "mnist": dict(figure="odd/even MNIST error rate vs repetitions (quadratic loss)", kind="mnist",
                  p=3000, K=[2], T=[5], n_t=[100], T_c=[1], repeats=100, desk_scale=1.0, scaled=(), trials=1),
    "custom": dict(figure="user-defined grid"),
}

_CONFIG_KEYS = set(GRID_KEYS) | {
    "experiment", "p", "energy", "param_model", "mode", "trials", "seed", "output", "format", "parallel",
    "scale", "estimators", "repeats", "mnist_dir", "test_size", "reshuffle",
}


def _as_list(v) -> list:
    return list(v) if isinstance(v, (list, tuple)) else [v]


def build_config(overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Merge a preset with user overrides, applying the desk scale if needed."""
    overrides = dict(overrides or {})
    unknown = sorted(set(overrides) - _CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"{unknown[0]}: unknown config key")
    exp = overrides.get("experiment", "custom")
    if exp not in PRESETS:
        raise ConfigError(f"experiment: unknown id {exp!r}")
    preset = copy.deepcopy(PRESETS[exp])
    cfg = ExperimentConfig(experiment=exp)
    cfg.figure = preset.pop("figure", "")
    scaled = preset.pop("scaled", ())
    desk_scale = preset.pop("desk_scale", 1.0)
    desk_K = preset.pop("desk_K", None)
    for key in GRID_KEYS:
        if key in preset:
            cfg.grid[key] = _as_list(preset.pop(key))
    for key, val in preset.items():
        setattr(cfg, key, val)

    mode = overrides.get("mode", cfg.mode)
    scale = float(overrides.get("scale", 1.0 if mode == "theory" else desk_scale))
    if scale != 1.0:
        if not 0 < scale <= 1:
            raise ConfigError("scale: must lie in (0, 1]")
        if "p" in scaled:
            cfg.p = max(1, int(round(cfg.p * scale)))
        for key in ("p_S", "n_t", "K"):
            if key in scaled:
                cfg.grid[key] = sorted({max(0 if key == "p_S" else 1, int(round(v * scale))) for v in cfg.grid[key]})
        if desk_K is not None:
            cfg.grid["K"] = list(desk_K)
    cfg.scale = scale

    for key, val in overrides.items():
        if key in GRID_KEYS:
            cfg.grid[key] = _as_list(val)
        elif key == "estimators":
            cfg.estimators = _as_list(val)
        elif key != "scale":
            setattr(cfg, key, val)
    try:
        cfg.p, cfg.trials, cfg.seed, cfg.parallel = int(cfg.p), int(cfg.trials), int(cfg.seed), int(cfg.parallel)
        cfg.repeats, cfg.test_size = int(cfg.repeats), int(cfg.test_size)
        cfg.energy = float(cfg.energy)
        for key in ("K", "T", "p_S", "n_t", "T_c"):
            cfg.grid[key] = [int(v) for v in cfg.grid[key]]
        for key in ("eps", "sigma2"):
            cfg.grid[key] = [float(v) for v in cfg.grid[key]]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value type: {exc}") from exc
    return cfg.validate()


def load_config(path) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    data = yaml.safe_load(text) or {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a key-value mapping")
    for key, val in data.items():
        if isinstance(val, dict):
            raise ConfigError(f"{key}: nested sections are not allowed; use flat keys")
    return data


def point_seed(seed: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(2, index))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


def _theory_applies(pt: Dict[str, Any], partition: Partition) -> bool:
    # Closed forms need isotropic regressors and one round or wide local blocks.
    if pt["eps"] != 0.0:
        return False
    return pt["T_c"] == 1 or all(pk > pt["n_t"] + 1 for pk in partition.sizes)


def _spec_for(cfg: ExperimentConfig, pt: Dict[str, Any]) -> TaskSequenceSpec:
    return TaskSequenceSpec.uniform(
        cfg.p, min(pt["p_S"], cfg.p), pt["n_t"], pt["sigma2"], pt["T"],
        regressor_model="toeplitz" if pt["eps"] > 0 else "iid_gaussian", eps=pt["eps"],
        param_model=cfg.param_model, energy=cfg.energy)


def _sweep_point(cfg: ExperimentConfig, index: int, pt: Dict[str, Any]) -> List[Dict[str, Any]]:
    rows = []
    if cfg.p % pt["K"]:
        return rows
    spec = _spec_for(cfg, pt)
    partition = Partition.equal(cfg.p, pt["K"])
    dims = TheoryDims.equal(pt["n_t"], cfg.p, pt["K"], pt["T"])
    seed = point_seed(cfg.seed, index)
    resample = cfg.param_model == "random_energy"
    for est in cfg.estimators:
        start = time.perf_counter()
        row = {"experiment": cfg.experiment, "estimator": est, "p": cfg.p, **pt,
               "theory": None, "mc_mean": None, "mc_stderr": None, "forgetting_mean": None,
               "forgetting_stderr": None, "trials": 0, "nonfinite": 0,
               "divergent": bool(dims.divergent) if est == "cocoa" else False}
        if est == "cocoa" and cfg.mode in ("theory", "both") and _theory_applies(pt, partition):
            if cfg.mode == "theory" or resample:
                gram = expected_gram_shared(cfg.p, spec.p_shared, spec.T, partition, cfg.energy)
            else:
                gram = block_gram(generate_parameters(spec, parameter_stream(seed)), partition)
            row["theory"] = theorem1_from_gram(gram, spec.sigma2, dims, spec.T, spec.T)
        if cfg.mode in ("simulate", "both") and cfg.trials > 0:
            mc = run_monte_carlo(spec, partition, pt["T_c"], cfg.trials, seed,
                                 resample_parameters=resample, estimator=est)
            row.update(mc_mean=mc.generalization.mean, mc_stderr=mc.generalization.stderr,
                       forgetting_mean=mc.forgetting.mean, forgetting_stderr=mc.forgetting.stderr,
                       trials=mc.generalization.trials, nonfinite=mc.generalization.nonfinite)
        row["wall_time"] = time.perf_counter() - start
        rows.append(row)
    return rows


def learning_curve(spec: TaskSequenceSpec, partition: Partition, T_c: int, repeats: int, trials: int,
                   seed: int) -> List[Dict[str, Any]]:
    """Errors after every CoCoA round while the task sequence is replayed.

    Trials run as one batch; parameters are fixed across trials.
    """
    ws = generate_parameters(spec, parameter_stream(seed))
    draws = [generate_task_data(spec, ws, _trial_stream(seed, i).generator()) for i in range(trials)]
    tasks = [TaskData(k + 1, np.stack([d[k].A for d in draws]), np.stack([d[k].y for d in draws]), ws[k],
                      spec.sigma2[k]) for k in range(spec.T)]
    state = CocoaState.zeros(partition, batch=(trials,))
    rows: List[Dict[str, Any]] = []
    step = 0
    for rep in range(1, repeats + 1):
        for k, data in enumerate(tasks):
            step += 1
            seen = tasks[: step] if step <= spec.T else tasks

            def record(s, step=step, rep=rep, k=k, seen=seen):
                g = McSummary.from_values(generalization_exact(s.w_hat, ws, spec.sigma2))
                f = McSummary.from_values(forgetting(s.w_hat, seen))
                rows.append({"pass": rep, "task_step": step, "task": k + 1, "iteration": s.iter_count,
                             "gen_mean": g.mean, "gen_stderr": g.stderr, "forg_mean": f.mean,
                             "forg_stderr": f.stderr, "trials": trials})

            state.run_task(data, T_c, callback=record)
    return rows


def _learning_point(cfg: ExperimentConfig, index: int, pt: Dict[str, Any]) -> List[Dict[str, Any]]:
    if cfg.p % pt["K"]:
        return []
    spec = _spec_for(cfg, pt)
    partition = Partition.equal(cfg.p, pt["K"])
    seed = point_seed(cfg.seed, index)
    dims = TheoryDims.equal(pt["n_t"], cfg.p, pt["K"], pt["T"])
    theory_ok = cfg.mode != "simulate" and _theory_applies(pt, partition)
    ws = generate_parameters(spec, parameter_stream(seed))
    gram = block_gram(ws, partition)
    start = time.perf_counter()
    rows = learning_curve(spec, partition, pt["T_c"], cfg.repeats, max(cfg.trials, 1), seed)
    out = []
    for row in rows:
        theory = None
        if theory_ok and row["pass"] == 1 and row["iteration"] == pt["T_c"]:
            theory = theorem1_from_gram(gram, spec.sigma2, dims, row["task_step"], spec.T)
        out.append({"experiment": cfg.experiment, "p": cfg.p, **pt, **row, "theory": theory})
    elapsed = time.perf_counter() - start
    for row in out:
        row["wall_time"] = elapsed
    return out


def _run_points(cfg: ExperimentConfig, fn) -> List[Dict[str, Any]]:
    points = cfg.points()
    if cfg.parallel > 1:
        with ProcessPoolExecutor(max_workers=cfg.parallel) as pool:
            chunks = list(pool.map(fn, [cfg] * len(points), range(len(points)), points))
    else:
        chunks = [fn(cfg, i, pt) for i, pt in enumerate(points)]
    return [row for chunk in chunks for row in chunk]


def metadata_for(cfg: ExperimentConfig) -> Dict[str, Any]:
    meta = asdict(cfg)
    meta["figure"] = cfg.figure
    meta["scale_factor"] = cfg.scale
    return meta


def run_experiment(cfg: ExperimentConfig, out: Optional[str] = None, fmt: Optional[str] = None):
    """Execute the grid; write the table if an output path is known.

    Returns ``(rows, metadata)``.
    """
    if cfg.kind == "mnist":
        rows = run_mnist(cfg)
    elif cfg.kind == "learning_curve":
        rows = _run_points(cfg, _learning_point)
    else:
        rows = _run_points(cfg, _sweep_point)
    meta = metadata_for(cfg)
    path = out or cfg.output
    if path:
        emit(rows, fmt or cfg.format, path, metadata=meta)
    return rows, meta


def _parity_targets(labels: np.ndarray) -> np.ndarray:
    """Rows: odd-model targets, even-model targets (+1 own parity, -1 other)."""
    odd = np.where(labels % 2 == 1, 1.0, -1.0)
    return np.stack([odd, -odd])


def run_mnist(cfg: ExperimentConfig, data: Optional[Dict[str, mn.LabeledImages]] = None) -> List[Dict[str, Any]]:
    """Train odd and even models with CoCoA over replayed digit-pair tasks.

    Prediction is odd when the odd model scores higher. One row per
    (repetition, task) with the test error rate.
    """
    if data is None:
        data = mn.load_mnist(cfg.mnist_dir)
    train, test = data["train"], data["test"]
    K, n_t, T_c = cfg.grid["K"][0], cfg.grid["n_t"][0], cfg.grid["T_c"][0]
    T = cfg.grid["T"][0]
    if not 1 <= T <= len(mn.TASK_PAIRS):
        raise ConfigError(f"T: MNIST has {len(mn.TASK_PAIRS)} tasks, got {T}")
    pairs = mn.TASK_PAIRS[:T]
    p = cfg.p
    partition = Partition.equal(p, K)
    root = RngStream(cfg.seed, (3,))
    Z = mn.sample_feature_bank(train.x.shape[1], p, root.child(0))

    test_sets = []
    for k, pair in enumerate(pairs):
        idx = mn.select_task_samples(test.labels, pair, cfg.test_size, root.child(2).child(k), balanced=False)
        test_sets.append((mn.random_features(test.x[idx], Z), test.labels[idx] % 2 == 1))

    def training_task(k: int, rep: int) -> TaskData:
        stream = root.child(1).child(k) if not cfg.reshuffle else root.child(1).child(k).child(rep)
        idx = mn.select_task_samples(train.labels, pairs[k], n_t, stream, balanced=True)
        return TaskData(k, mn.random_features(train.x[idx], Z), _parity_targets(train.labels[idx]), None, 0.0)

    fixed = [training_task(k, 0) for k in range(len(pairs))]
    state = CocoaState.zeros(partition, batch=(2,))
    rows = []
    start = time.perf_counter()
    for rep in range(1, cfg.repeats + 1):
        for k in range(len(pairs)):
            state.run_task(fixed[k] if not cfg.reshuffle else training_task(k, rep), T_c)
        for k, (F, is_odd) in enumerate(test_sets):
            scores = F @ state.w_hat.T
            pred_odd = scores[:, 0] > scores[:, 1]
            rows.append({"experiment": cfg.experiment, "repetition": rep, "task": k,
                         "digits": f"{pairs[k][0]}{pairs[k][1]}", "error_rate": float(np.mean(pred_odd != is_odd)),
                         "n_test": int(is_odd.size), "p": p, "K": K, "n_t": n_t, "T_c": T_c,
                         "wall_time": time.perf_counter() - start})
    return rows
