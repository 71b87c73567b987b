import json
import subprocess
import sys

import numpy as np
import pytest

from secrate.cli import main
from secrate.harness import (
    EXPERIMENTS,
    ConfigError,
    ExperimentConfig,
    Table,
    emit_csv,
    read_csv,
    run,
    trial_seeds,
)


def test_experiment_registry():
    assert set(EXPERIMENTS) == {"region-surface", "rd-curve", "roundtrip", "codebook-audit",
                                "attack-sweep", "equivocation-tiny", "lemma-trends"}


class TestConfig:
    def test_unknown_experiment(self):
        with pytest.raises(ConfigError):
            ExperimentConfig("nope").resolved()

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"experiment": "roundtrip", "colour": 1})

    @pytest.mark.parametrize("bad", [{"trials": 0}, {"R": 0.2, "R_K": 0.5}, {"delta": 0.0}, {"R_K": -1.0},
                                     {"pmf": [0.5, 0.6]}, {"n": 0}, {"budgets": [-0.1]}])
    def test_invalid(self, bad):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"experiment": "roundtrip", **bad}).resolved()

    def test_defaults_and_digest(self):
        a = ExperimentConfig("roundtrip").resolved()
        assert (a.n, a.R, a.R_K, a.delta) == (4, 1.0, 0.5, 0.5)
        b = ExperimentConfig("roundtrip", out="elsewhere", workers=3).resolved()
        assert a.digest() == b.digest()
        assert a.digest() != ExperimentConfig("roundtrip", seed=1).resolved().digest()

    def test_trial_seeds(self):
        assert trial_seeds(5, 4) == trial_seeds(5, 4)
        assert trial_seeds(5, 4)[:2] == trial_seeds(5, 2)
        assert len(set(trial_seeds(5, 100))) == 100


class TestCsv:
    def test_empty_table(self, tmp_path):
        emit_csv(Table("t", ("a", "b"), []), tmp_path / "t.csv")
        assert (tmp_path / "t.csv").read_text() == "a,b\n"

    def test_round_trip(self, tmp_path):
        rows = [[1.0 / 3, 2, "x,y", True], [1e-12, -3, 'q"', False]]
        emit_csv(Table("t", ("f", "i", "s", "b"), rows), tmp_path / "t.csv", digest="abc")
        digest, cols, back = read_csv(tmp_path / "t.csv")
        assert digest == "abc" and cols == ("f", "i", "s", "b")
        assert back[0][0] == pytest.approx(1 / 3, rel=1e-8)
        assert back[0][2] == "x,y" and back[1][2] == 'q"'
        assert back[0][3] == 1 and back[1][3] == 0
        assert "0.333333333" in (tmp_path / "t.csv").read_text()


class TestRun:
    def test_roundtrip_has_no_mismatch(self, tmp_path):
        man, tables = run({"experiment": "roundtrip", "out": str(tmp_path)})
        assert man.summary["success_mismatches"] == 0
        assert man.summary["successes"] > 0
        # 16 blocks times a bin of 2**(4 * 0.5) keys
        assert len(tables[0].rows) == 16 * 4

    def test_region_surface_reread(self, tmp_path):
        man, tables = run({"experiment": "region-surface", "out": str(tmp_path)})
        digest, cols, rows = read_csv(tmp_path / "region-surface.csv")
        assert digest == man.config_digest
        assert len(rows) == 51 * 51
        G = np.array([r[2] for r in rows]).reshape(51, 51)
        assert np.all(np.diff(G, axis=0) >= -1e-9) and np.all(np.diff(G, axis=1) <= 1e-9)
        ours = np.array(tables[0].rows)[:, 2]
        assert np.allclose(G.ravel(), ours, rtol=1e-8, atol=1e-12)

    def test_byte_identical_reruns(self, tmp_path):
        cfg = {"experiment": "codebook-audit", "n": 8, "trials": 4, "seed": 3}
        m1, _ = run({**cfg, "out": str(tmp_path / "a")})
        m2, _ = run({**cfg, "out": str(tmp_path / "b"), "workers": 2})
        a = (tmp_path / "a" / "codebook-audit.csv").read_bytes()
        b = (tmp_path / "b" / "codebook-audit.csv").read_bytes()
        assert a == b
        assert m1.trial_seeds == m2.trial_seeds
        assert a.startswith(b"# config_digest=")

    def test_attack_sweep_small(self, tmp_path):
        man, tables = run({"experiment": "attack-sweep", "trials": 3, "budgets": [0.1, 0.4], "out": str(tmp_path)})
        rows = tables[0].rows
        strategies = {r[0] for r in rows}
        assert strategies == {"key-index", "rd", "timesharing"}
        assert all(r[5] <= r[3] + 1e-12 for r in rows if r[0] != "key-index" and r[5] == r[5])
        assert man.summary["gamma"] == pytest.approx(0.23208, abs=1e-4)

    def test_equivocation_tiny(self, tmp_path):
        _, tables = run({"experiment": "equivocation-tiny", "trials": 2, "out": str(tmp_path)})
        for t, seed, de, r, h, bound in tables[0].rows:
            if de == 0:
                assert r == pytest.approx(h, abs=1e-9)
            assert r <= h + 1e-9


class TestCli:
    def test_list(self, capsys):
        assert main(["list"]) == 0
        assert "region-surface" in capsys.readouterr().out

    def test_region(self, capsys):
        assert main(["region", "--key-rate", "0.5", "--de", "0.05"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["gamma"] == pytest.approx(0.436422, abs=1e-5)

    def test_run_with_config_and_overrides(self, tmp_path, capsys):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"experiment": "roundtrip", "n": 3, "seed": 9}))
        assert main(["run", "--config", str(cfg), "--n", "4", "--out", str(tmp_path / "o")]) == 0
        _, _, rows = read_csv(tmp_path / "o" / "roundtrip.csv")
        assert len(rows) == 2**4 * 4

    def test_exit_codes(self, tmp_path, capsys):
        assert main(["run", "--experiment", "nope"]) == 1
        assert main(["run", "--experiment", "roundtrip", "--trials", "0"]) == 1
        assert main(["run", "--experiment", "roundtrip", "--n", "40", "--out", str(tmp_path)]) == 2
        assert main(["region", "--key-rate", "-1", "--de", "0"]) == 1

    def test_module_entry_point(self):
        r = subprocess.run([sys.executable, "-m", "secrate", "list"], capture_output=True, text=True)
        assert r.returncode == 0 and "attack-sweep" in r.stdout
