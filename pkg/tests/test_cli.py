import json

import pytest

from cocoacl.cli import main
from cocoacl.output import read_table

from test_mnist import fake_mnist  # noqa: F401


class TestCli:
    def test_theory_to_stdout(self, capsys):
        assert main(["theory", "--experiment", "fig4"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("experiment,estimator")

    def test_simulate_json(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("p: 16\nK: [1, 2]\nn_t: 4\nT: 2\n")
        out = tmp_path / "r.json"
        assert main(["simulate", "--config", str(cfg), "--trials", "20", "--seed", "3",
                     "--out", str(out), "--format", "json"]) == 0
        doc = json.loads(out.read_text())
        assert doc["metadata"]["seed"] == 3 and len(doc["rows"]) == 2
        assert all(r["trials"] == 20 for r in doc["rows"])

    def test_seed_reproducible(self, tmp_path):
        args = ["simulate", "--experiment", "custom", "--trials", "10", "--seed", "9", "--format", "csv"]
        main(args + ["--out", str(tmp_path / "a.csv")])
        main(args + ["--out", str(tmp_path / "b.csv")])
        strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time"} for r in rows]  # noqa: E731
        assert strip(read_table(tmp_path / "a.csv")) == strip(read_table(tmp_path / "b.csv"))

    def test_unknown_key_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "c.yaml"
        cfg.write_text("Kk: 3\n")
        assert main(["theory", "--config", str(cfg)]) == 2
        assert "Kk" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["theory", "--config", str(tmp_path / "none.yaml")]) == 2

    def test_mnist_env_fallback(self, fake_mnist, monkeypatch, tmp_path):  # noqa: F811
        monkeypatch.setenv("COCOACL_MNIST_DIR", str(fake_mnist))
        cfg = tmp_path / "m.yaml"
        cfg.write_text("p: 20\nn_t: 10\nrepeats: 2\ntest_size: 10\n")
        assert main(["mnist", "--config", str(cfg), "--out", str(tmp_path / "m.csv")]) == 0
        assert len(read_table(tmp_path / "m.csv")) == 10

    def test_mnist_missing_data(self, tmp_path, monkeypatch):
        monkeypatch.delenv("COCOACL_MNIST_DIR", raising=False)
        assert main(["mnist", "--data-dir", str(tmp_path)]) == 3

    def test_verify_pass_and_fail_codes(self, capsys):
        assert main(["verify", "--only", "1", "3"]) == 0
        assert "[PASS] criterion  1" in capsys.readouterr().out
        assert main(["verify", "--only", "99"]) == 2

    def test_bad_seed(self):
        with pytest.raises(SystemExit):
            main(["theory", "--seed", "-1"])
