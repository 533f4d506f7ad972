import numpy as np
import pytest

from cocoacl.cocoa import Partition
from cocoacl.linalg import RngStream
from cocoacl.metrics import (
    McSummary,
    forgetting,
    generalization_exact,
    generalization_sampled,
    run_monte_carlo,
    run_trial,
    training_error,
)
from cocoacl.tasks import TaskData, TaskSequenceSpec, generate_parameters
from cocoacl.theory import TheoryDims, theorem1_error


class TestErrors:
    def test_training_error_value(self):
        A = np.eye(2)
        assert training_error(np.array([1.0, 0.0]), A, np.array([0.0, 2.0])) == pytest.approx((1 + 4) / 4)

    def test_training_error_shape_check(self):
        with pytest.raises(ValueError):
            training_error(np.zeros(3), np.zeros((2, 2)), np.zeros(2))

    def test_forgetting_averages_tasks(self):
        A = np.eye(2)
        tasks = [TaskData(1, A, np.zeros(2), None, 0.0), TaskData(2, A, np.array([2.0, 0.0]), None, 0.0)]
        assert forgetting(np.zeros(2), tasks) == pytest.approx((0 + 4 / 4) / 2)

    def test_generalization_exact(self):
        ws = [np.ones(3), np.zeros(3)]
        assert generalization_exact(np.zeros(3), ws, [0.1, 0.2]) == pytest.approx((3.1 + 0.2) / 2)
        cov = 2 * np.eye(3)
        assert generalization_exact(np.zeros(3), ws, [0.0, 0.0], cov=cov) == pytest.approx(3.0)

    def test_sampled_agrees_with_exact(self):
        ws = [np.array([1.0, -1.0, 0.5])]
        mean, se = generalization_sampled(np.zeros(3), ws, [0.3], RngStream(1).generator(), 200_000)
        assert abs(mean - generalization_exact(np.zeros(3), ws, [0.3])) < 4 * se


class TestSummary:
    def test_nonfinite_counted(self):
        s = McSummary.from_values(np.array([1.0, 3.0, np.inf]), drop_nonfinite=True)
        assert (s.mean, s.trials, s.nonfinite) == (2.0, 2, 1)
        assert s.stderr == pytest.approx(np.sqrt(2) / np.sqrt(2))

    def test_empty(self):
        s = McSummary.from_values(np.array([np.nan]), drop_nonfinite=True)
        assert s.trials == 0 and np.isnan(s.mean)


class TestMonteCarlo:
    spec = TaskSequenceSpec.uniform(16, 8, 4, 0.05, 3)

    def test_chunking_does_not_change_results(self):
        part = Partition.equal(16, 2)
        a = run_monte_carlo(self.spec, part, 1, 37, seed=3, chunk=5)
        b = run_monte_carlo(self.spec, part, 1, 37, seed=3, chunk=512)
        np.testing.assert_array_equal(a.values["generalization"], b.values["generalization"])

    def test_batched_matches_single_trial(self):
        part = Partition.equal(16, 4)
        mc = run_monte_carlo(self.spec, part, 2, 4, seed=8)
        ws = generate_parameters(self.spec, RngStream(8, (0,)))
        tr = run_trial(self.spec, part, 2, 3, 8, w_true=ws)
        assert mc.values["generalization"][3] == pytest.approx(tr.generalization, rel=1e-12)
        assert mc.values["forgetting"][3] == pytest.approx(tr.forgetting, rel=1e-12)

    def test_matches_theory(self):
        part = Partition.equal(16, 2)
        mc = run_monte_carlo(self.spec, part, 1, 4000, seed=5)
        ws = generate_parameters(self.spec, RngStream(5, (0,)))
        th = theorem1_error(ws, self.spec.sigma2, TheoryDims.equal(4, 16, 2, 3), 3)
        assert abs(mc.generalization.mean - th) < 4 * mc.generalization.stderr

    def test_partial_training(self):
        mc = run_monte_carlo(self.spec, Partition.equal(16, 2), 1, 3, seed=1, t=0)
        ws = generate_parameters(self.spec, RngStream(1, (0,)))
        want = np.mean([w @ w for w in ws]) + 0.05
        np.testing.assert_allclose(mc.values["generalization"], want)

    def test_unknown_estimator(self):
        with pytest.raises(ValueError):
            run_monte_carlo(self.spec, Partition.equal(16, 2), 1, 2, seed=1, estimator="sgd")
