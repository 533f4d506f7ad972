"""Acceptance criteria at their stated tolerances; one PASS/FAIL line each."""

import pytest

from cocoacl.verify import run_check


def _run(number, verdicts, **kwargs):
    res = run_check(number, **kwargs)
    line = res.line()
    print(line)
    verdicts.append((number, line))
    assert res.passed, line


class TestAcceptance:
    def test_01_coefficients(self, verdicts):
        _run(1, verdicts)

    def test_02_theory_vs_simulation(self, verdicts):
        _run(2, verdicts)

    def test_03_specialization_chain(self, verdicts):
        _run(3, verdicts)

    def test_04_one_step_convergence(self, verdicts):
        _run(4, verdicts)

    def test_05_single_round_oracle(self, verdicts):
        _run(5, verdicts)

    def test_06_divergence_detection(self, verdicts):
        _run(6, verdicts)

    def test_07_limit_formulas(self, verdicts):
        _run(7, verdicts)

    def test_08_gaussian_identities(self, verdicts):
        _run(8, verdicts)

    def test_09_offline_ls_reference(self, verdicts):
        _run(9, verdicts)

    def test_10_mnist_properties(self, verdicts, mnist_dir):
        if mnist_dir is None:
            pytest.skip("MNIST IDX files not found; set COCOACL_MNIST_DIR")
        _run(10, verdicts, data_dir=mnist_dir)

    def test_11_forgetting_limit(self, verdicts):
        _run(11, verdicts)
