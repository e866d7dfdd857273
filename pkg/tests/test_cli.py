import json
from pathlib import Path

import pytest

from agesched import harness
from agesched.cli import main


def write_config(tmp_path, **overrides):
    cfg = harness.ExperimentConfig(
        K=2, T=400, W=100, chi=(0.5, 0.2), eta=10.0, eps=0.01, alpha=1.0,
        action_set={"kind": "one_of_k"},
        channel={"kind": "iid", "rates": [0.9, 0.7]},
        policies=("age",), runs=2, base_seed=11,
        outputs=str(tmp_path / "out"), log_stride=50,
    )
    for key, val in overrides.items():
        setattr(cfg, key, val)
    path = tmp_path / "cfg.json"
    cfg.to_json_file(path)
    return path, cfg


class TestRunCommand:
    def test_run_writes_csvs(self, tmp_path, capsys):
        path, cfg = write_config(tmp_path)
        assert main(["run", "--config", str(path)]) == 0
        out = Path(cfg.outputs)
        for name in ("regret.csv", "throughput.csv", "tslr.csv", "summary.csv",
                     "oracle_report.csv", "bounds.csv"):
            assert (out / name).exists(), name

    def test_run_overrides(self, tmp_path):
        path, cfg = write_config(tmp_path)
        out2 = tmp_path / "elsewhere"
        assert main(["run", "--config", str(path), "--runs", "1", "--out", str(out2)]) == 0
        assert (out2 / "summary.csv").exists()
        n_rows = len((out2 / "summary.csv").read_text().splitlines())
        assert n_rows == 2  # header + one run

    def test_bad_config_nonzero_exit(self, tmp_path):
        bad = tmp_path / "bad.json"
        path, cfg = write_config(tmp_path)
        data = json.loads(path.read_text())
        data["W"] = 7
        bad.write_text(json.dumps(data))
        assert main(["run", "--config", str(bad)]) != 0


class TestTraceDrivenRun:
    def test_trace_experiment_end_to_end(self, tmp_path, calibrated_trace_csv):
        cfg = harness.ExperimentConfig(
            K=3, T=2000, W=100, chi=(0.25, 0.3, 0.1), eta=100.0, eps=0.001,
            alpha=1.0, action_set={"kind": "one_of_k"},
            channel={
                "kind": "trace", "path": str(calibrated_trace_csv),
                "schema": "binary", "random_offset_max": 1000,
            },
            policies=("age", "qlen"), runs=3, base_seed=17,
            outputs=str(tmp_path / "trace_out"), log_stride=100,
        )
        path = tmp_path / "trace_cfg.json"
        cfg.to_json_file(path)
        assert main(["run", "--config", str(path)]) == 0
        summary = (tmp_path / "trace_out" / "summary.csv").read_text().splitlines()
        assert len(summary) == 1 + 3 * 2
        assert main(["run", "--config", str(path), "--trace-offset", "5"]) == 0


class TestOracleCommand:
    def test_prints_report(self, tmp_path, capsys):
        path, _ = write_config(tmp_path)
        assert main(["oracle", "--config", str(path)]) == 0
        out = capsys.readouterr().out
        assert "gamma_max" in out
        assert "sigma_star" in out


class TestBoundsCommand:
    def test_prints_bounds(self, tmp_path, capsys):
        path, _ = write_config(tmp_path)
        assert main(["bounds", "--config", str(path), "--mean-hol-age", "5.0,3.0"]) == 0
        out = capsys.readouterr().out
        assert "zero_violation_window" in out
        assert "measured_age_window_arm2" in out


class TestValidateTrace:
    def test_binary_ok(self, tmp_path, capsys):
        p = tmp_path / "t.csv"
        p.write_text("t,ch1,ch2\n1,1,0\n2,0,1\n")
        assert main(["validate-trace", "--file", str(p), "--schema", "binary"]) == 0
        out = capsys.readouterr().out
        assert "rows: 2" in out

    def test_malformed_nonzero_exit(self, tmp_path, capsys):
        p = tmp_path / "t.csv"
        p.write_text("t,ch1\n1,5\n")
        assert main(["validate-trace", "--file", str(p), "--schema", "binary"]) != 0

    def test_snr_schema_with_thresholds(self, tmp_path, capsys):
        p = tmp_path / "t.csv"
        p.write_text("t,snr1,snr2\n1,25.0,15.0\n2,10.0,30.0\n")
        rc = main(
            ["validate-trace", "--file", str(p), "--schema", "snr",
             "--thresholds", "20,20"]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "column_means: 0.5,0.5" in out

    def test_trace_preset_without_path_errors(self, capsys):
        assert main(["run", "--preset", "trace3"]) != 0
        assert "channel.path" in capsys.readouterr().err


class TestBench:
    def test_bench_runs_and_matches(self, tmp_path, capsys):
        assert main(["bench", "--preset", "abrupt2", "--t", "3000", "--reps", "1"]) == 0
        out = capsys.readouterr().out
        assert "outputs identical: True" in out
