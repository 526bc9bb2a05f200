import json
import subprocess
import sys

import pytest

from greedyvote.cli import ExperimentConfig, main
from greedyvote.errors import InvalidParameterError


def _read_rows(path):
    lines = path.read_text().strip().splitlines()
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


class TestTau:
    def test_prints_maximum(self, capsys):
        assert main(["tau"]) == 0
        out = capsys.readouterr().out
        assert "m_star=0.8157" in out or "m_star=0.8156" in out
        assert "tau_star=0.1226" in out

    def test_csv_output(self, tmp_path):
        out = tmp_path / "tau.csv"
        assert main(["tau", "-o", str(out)]) == 0
        header, rows = _read_rows(out)
        assert header == ["m_star", "tau_star"]
        assert abs(float(rows[0][0]) - 0.81566) < 1e-3


class TestExact:
    def test_geometric_marginal(self, capsys):
        assert main(["exact", "--weights", "0.5,0.5", "--k", "2", "--v-max", "12"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "v,prob"
        assert lines[1] == "2,0.5"
        assert lines[2] == "3,0.25"
        assert len(lines) == 1 + 11

    def test_joint_csv(self, tmp_path):
        out = tmp_path / "joint.csv"
        rc = main(["exact", "--weights", "0.5,0.5", "--dist", "joint",
                   "--node", "1", "--k", "2", "--v-max", "8", "-o", str(out)])
        assert rc == 0
        header, rows = _read_rows(out)
        assert header == ["ell", "v", "prob"]
        table = {(int(r[0]), int(r[1])): float(r[2]) for r in rows}
        assert table[(1, 2)] == 0.5

    def test_u_distribution_csv(self, capsys):
        assert main(["exact", "--weights", "0.5,0.5", "--dist", "u", "--k", "2"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines == ["u,prob", "1,0.5", "2,0.5"]

    def test_resource_limit_exit_code(self, capsys):
        weights = ",".join(["1"] * 15)
        assert main(["exact", "--weights", weights, "--k", "2", "--v-max", "8"]) == 3
        assert "resource limit" in capsys.readouterr().err


class TestGain:
    def test_positive_gain_row(self, tmp_path):
        out = tmp_path / "gain.csv"
        rc = main(["gain", "--generator", "zipf", "--s", "1.1", "--n", "1000",
                   "--k", "20", "--node", "1", "--fractions", "0.5,0.5",
                   "--n-runs", "30000", "--seed", "7", "-o", str(out)])
        assert rc == 0
        header, rows = _read_rows(out)
        assert header == ["axis_value", "mean", "std_error", "ci_low", "ci_high", "n_runs"]
        assert float(rows[0][1]) > 0
        assert rows[0][5] == "30000"

    def test_byte_identical_reruns(self, tmp_path):
        args = ["gain", "--s", "1.0", "--n", "50", "--k", "3",
                "--n-runs", "4000", "--seed", "9"]
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        assert main(args + ["-o", str(a)]) == 0
        assert main(args + ["-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_sidecar_embeds_resolved_config_and_seed(self, tmp_path):
        out = tmp_path / "gain.csv"
        assert main(["gain", "--s", "0.9", "--n", "40", "--k", "2",
                     "--n-runs", "500", "--seed", "21", "-o", str(out)]) == 0
        sidecar = json.loads((tmp_path / "gain.csv.config.json").read_text())
        assert sidecar["seed"] == 21
        assert sidecar["subcommand"] == "gain"
        assert sidecar["s"] == 0.9
        assert sidecar["n"] == 40

    def test_weights_csv_generator(self, tmp_path):
        wfile = tmp_path / "w.csv"
        wfile.write_text("weight\n6\n4\n")
        out = tmp_path / "gain.csv"
        rc = main(["gain", "--generator", "csv", "--weights-csv", str(wfile),
                   "--k", "2", "--n-runs", "2000", "--seed", "3", "-o", str(out)])
        assert rc == 0


class TestConfigFile:
    def test_flags_override_file(self, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"s": 1.5, "n": 30, "k": 2,
                                   "n_runs": 500, "seed": 4}))
        out = tmp_path / "gain.csv"
        rc = main(["gain", "--config", str(cfg), "--s", "0.5", "-o", str(out)])
        assert rc == 0
        sidecar = json.loads((tmp_path / "gain.csv.config.json").read_text())
        assert sidecar["s"] == 0.5
        assert sidecar["n"] == 30

    def test_unknown_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps({"zipf_exponent": 1.5}))
        assert main(["gain", "--config", str(cfg)]) == 2
        assert "zipf_exponent" in capsys.readouterr().err

    def test_missing_file_rejected(self, capsys):
        assert main(["gain", "--config", "/nonexistent/config.json"]) == 2

    def test_resolve_rejects_unknown_subcommand(self):
        with pytest.raises(InvalidParameterError):
            ExperimentConfig.resolve("plot", {})


class TestSweep:
    def test_rows_per_axis_value(self, tmp_path):
        out = tmp_path / "sweep.csv"
        rc = main(["sweep", "--axis", "network_size", "--axis-values", "30,60",
                   "--s", "0.8", "--k", "3", "--n-runs", "2000", "--seed", "5",
                   "-o", str(out)])
        assert rc == 0
        header, rows = _read_rows(out)
        assert [r[0] for r in rows] == ["30", "60"]

    def test_missing_axis_values(self, capsys):
        assert main(["sweep", "--axis", "network_size"]) == 2


class TestKdeAndQq:
    def test_kde_rows(self, tmp_path):
        out = tmp_path / "kde.csv"
        rc = main(["kde", "--s", "1.0", "--n", "50", "--k", "3",
                   "--n-runs", "3000", "--seed", "2", "-o", str(out)])
        assert rc == 0
        header, rows = _read_rows(out)
        assert header == ["x", "density"]
        assert len(rows) == 512

    def test_qq_rows(self, tmp_path):
        out = tmp_path / "qq.csv"
        rc = main(["qq", "--s", "1.0", "--n", "50", "--k", "3",
                   "--n-runs", "3000", "--seed", "2", "-o", str(out)])
        assert rc == 0
        header, rows = _read_rows(out)
        assert header == ["theoretical", "sample"]
        assert len(rows) == 3000


class TestSampleAndPower:
    def test_sample_rows(self, capsys):
        assert main(["sample", "--weights", "0.5,0.5", "--k", "2",
                     "--n-runs", "5", "--seed", "1"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "run,v,count"
        assert len(lines) == 6

    def test_power_row(self, tmp_path):
        out = tmp_path / "power.csv"
        rc = main(["power", "--weights", "0.75,0.25", "--k", "2", "--node", "1",
                   "--n-runs", "20000", "--seed", "3", "-o", str(out)])
        assert rc == 0
        header, rows = _read_rows(out)
        mean, se = float(rows[0][1]), float(rows[0][2])
        assert abs(mean - 0.650948) <= 4 * se

    def test_power_exact_epsilon(self, capsys):
        rc = main(["power", "--weights", "0.75,0.25", "--k", "2", "--node", "1",
                   "--epsilon", "1e-8"])
        assert rc == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "node,value,error_bound"
        value = float(lines[1].split(",")[1])
        assert abs(value - 0.650948) < 1e-6


class TestFpc:
    def test_round_csv_and_summary(self, tmp_path):
        out = tmp_path / "fpc.csv"
        rc = main(["fpc", "--s", "0", "--n", "60", "--k", "10",
                   "--ones-fraction", "0.9", "--seed", "4", "-o", str(out)])
        assert rc == 0
        header, rows = _read_rows(out)
        assert header == ["round", "u_t", "ones_fraction"]
        summary = json.loads((tmp_path / "fpc.csv.summary.json").read_text())
        assert summary["consensus_round"] == len(rows)
        assert summary["final_agreement"] == 1.0
        sidecar = json.loads((tmp_path / "fpc.csv.config.json").read_text())
        assert sidecar["ones_fraction"] == 0.9

    def test_threads_env_does_not_change_output(self, tmp_path, monkeypatch):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        args = ["power", "--weights", "0.6,0.4", "--k", "2",
                "--n-runs", "15000", "--seed", "8"]
        monkeypatch.setenv("GREEDYVOTE_THREADS", "1")
        assert main(args + ["-o", str(a)]) == 0
        monkeypatch.setenv("GREEDYVOTE_THREADS", "4")
        assert main(args + ["-o", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestConsoleScript:
    def test_entry_point_runs(self):
        proc = subprocess.run(
            [sys.executable, "-m", "greedyvote.cli", "tau"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "m_star" in proc.stdout

    def test_invalid_flag_exit_code(self):
        proc = subprocess.run(
            [sys.executable, "-m", "greedyvote.cli", "gain", "--bogus", "1"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2
