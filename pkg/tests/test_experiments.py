import numpy as np
import pytest

from cocoacl import linalg
from cocoacl.experiments import (
    PRESETS,
    ConfigError,
    build_config,
    learning_curve,
    load_config,
    point_seed,
    run_experiment,
    run_mnist,
)
from cocoacl.cocoa import Partition
from cocoacl.tasks import TaskSequenceSpec
from cocoacl.theory import corollary4_error

from test_mnist import fake_mnist  # noqa: F401


def _strip(rows):
    return [{k: v for k, v in r.items() if k != "wall_time"} for r in rows]


class TestConfig:
    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            build_config({"bogus": 1})

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            build_config({"experiment": "fig99"})

    def test_nested_rejected(self, tmp_path):
        (tmp_path / "c.yaml").write_text("grid:\n  K: 1\n")
        with pytest.raises(ConfigError, match="flat"):
            load_config(tmp_path / "c.yaml")

    def test_scalars_become_lists(self):
        cfg = build_config({"K": 4, "n_t": [3, 5], "p": 16})
        assert cfg.grid["K"] == [4] and len(cfg.points()) == 2

    def test_theory_mode_keeps_full_dimensions(self):
        cfg = build_config({"experiment": "fig2", "mode": "theory", "trials": 0})
        assert cfg.p == 1024 and cfg.grid["n_t"] == [2048] and cfg.scale == 1.0

    def test_simulation_uses_desk_scale(self):
        cfg = build_config({"experiment": "fig2"})
        assert cfg.p == 256 and cfg.grid["p_S"] == [192] and cfg.grid["n_t"] == [512]
        assert max(cfg.grid["K"]) == 64

    def test_vs_nt_keeps_block_width(self):
        cfg = build_config({"experiment": "fig_vs_nt"})
        assert cfg.p // cfg.grid["K"][0] == 32

    def test_simulation_needs_trials(self):
        with pytest.raises(ConfigError):
            build_config({"mode": "both", "trials": 0})

    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_presets_build(self, name):
        cfg = build_config({"experiment": name})
        assert cfg.figure

    def test_point_seeds_distinct(self):
        assert len({point_seed(0, i) for i in range(100)}) == 100


class TestSweep:
    def test_theory_only_draws_nothing(self, monkeypatch):
        def boom(*a, **k):
            raise AssertionError("random stream used")

        monkeypatch.setattr(linalg.RngStream, "generator", boom)
        monkeypatch.setattr(np.random, "default_rng", boom)
        rows, _ = run_experiment(build_config({"experiment": "fig2", "mode": "theory", "trials": 0}))
        assert len(rows) == 55 and all(r["mc_mean"] is None for r in rows)

    def test_theory_matches_corollary4(self):
        rows, _ = run_experiment(build_config({"p": 16, "K": [1, 4], "T": 3, "p_S": 8, "n_t": 32, "sigma2": 0.1,
                                               "mode": "theory", "trials": 0}))
        for r in rows:
            assert r["theory"] == pytest.approx(corollary4_error(16, 8, 1.0, 0.1, 32, r["K"], 3), rel=1e-12)

    def test_divisibility_and_divergence(self):
        rows, _ = run_experiment(build_config({"p": 12, "K": [2, 5], "n_t": 6, "mode": "theory", "trials": 0}))
        assert [r["K"] for r in rows] == [2]
        assert rows[0]["divergent"] and rows[0]["theory"] == float("inf")

    def test_theory_withheld_outside_assumptions(self):
        rows, _ = run_experiment(build_config({"p": 8, "K": 2, "n_t": 20, "T_c": 3, "trials": 20}))
        assert rows[0]["theory"] is None and rows[0]["mc_mean"] is not None

    def test_toeplitz_has_no_theory(self):
        rows, _ = run_experiment(build_config({"p": 8, "K": 2, "n_t": 20, "eps": 0.5, "trials": 20}))
        assert rows[0]["theory"] is None and np.isfinite(rows[0]["mc_mean"])

    def test_parallel_rows_match_serial(self):
        base = {"p": 12, "K": [1, 2, 3], "T": [1, 2], "n_t": 4, "trials": 30, "seed": 7}
        serial, _ = run_experiment(build_config(base))
        par, _ = run_experiment(build_config({**base, "parallel": 2}))
        assert _strip(serial) == _strip(par)

    def test_ls_estimator_rows(self):
        rows, _ = run_experiment(build_config({"p": 8, "K": 2, "n_t": 20, "trials": 10,
                                               "estimators": ["cocoa", "offline_ls"]}))
        assert [r["estimator"] for r in rows] == ["cocoa", "offline_ls"]
        assert rows[1]["theory"] is None

    def test_writes_output(self, tmp_path):
        out = tmp_path / "r.csv"
        run_experiment(build_config({"p": 8, "K": 2, "mode": "theory", "trials": 0}), out=str(out))
        assert out.exists() and (tmp_path / "r.csv.meta.json").exists()


class TestLearningCurve:
    def test_rows_per_iteration_and_replay(self):
        spec = TaskSequenceSpec.uniform(16, 8, 4, 0.0, 3)
        rows = learning_curve(spec, Partition.equal(16, 2), 4, 2, 5, seed=1)
        assert len(rows) == 2 * 3 * 4
        assert rows[-1]["pass"] == 2 and rows[-1]["task_step"] == 6 and rows[-1]["iteration"] == 4

    def test_forgetting_is_zero_on_first_task(self):
        spec = TaskSequenceSpec.uniform(16, 8, 4, 0.0, 2)
        rows = learning_curve(spec, Partition.equal(16, 2), 1, 1, 3, seed=2)
        assert rows[0]["forg_mean"] == pytest.approx(0.0, abs=1e-20)

    def test_theory_at_task_ends(self):
        rows, _ = run_experiment(build_config({"experiment": "fig6", "p": 32, "p_S": 16, "n_t": 4, "T": 2,
                                               "T_c": 3, "repeats": 1, "trials": 4}))
        marked = [r for r in rows if r["theory"] is not None]
        assert [(r["task_step"], r["iteration"]) for r in marked] == [(1, 3), (2, 3)]


class TestMnistRun:
    def test_rows(self, fake_mnist):  # noqa: F811
        cfg = build_config({"experiment": "mnist", "p": 20, "n_t": 10, "repeats": 3, "test_size": 20,
                            "mnist_dir": str(fake_mnist)})
        rows = run_mnist(cfg)
        assert len(rows) == 3 * 5
        assert all(0 <= r["error_rate"] <= 1 for r in rows)
        assert {r["digits"] for r in rows} == {"01", "23", "45", "67", "89"}

    def test_deterministic(self, fake_mnist):  # noqa: F811
        cfg = build_config({"experiment": "mnist", "p": 20, "n_t": 10, "repeats": 2, "test_size": 20,
                            "mnist_dir": str(fake_mnist), "reshuffle": True})
        assert _strip(run_mnist(cfg)) == _strip(run_mnist(cfg))

    def test_missing_data(self, tmp_path):
        from cocoacl.mnist import MnistError

        with pytest.raises(MnistError):
            run_mnist(build_config({"experiment": "mnist", "mnist_dir": str(tmp_path)}))
