import csv
import math
from pathlib import Path

import numpy as np
import pytest

from agesched import harness, learning, metrics, oracle
from agesched import environment as env


def small_iid_config(tmp_path, policies=("age", "qlen"), runs=3, T=600, seed=99):
    return harness.ExperimentConfig(
        K=2,
        T=T,
        W=100,
        chi=(0.5, 0.2),
        eta=10.0,
        eps=0.01,
        alpha=1.0,
        action_set={"kind": "one_of_k"},
        channel={"kind": "iid", "rates": [0.9, 0.7]},
        policies=policies,
        runs=runs,
        base_seed=seed,
        outputs=str(tmp_path / "out"),
        log_stride=50,
    )


class TestConfig:
    def test_json_round_trip(self, tmp_path):
        cfg = harness.preset("abrupt2")
        path = tmp_path / "cfg.json"
        cfg.to_json_file(path)
        back = harness.ExperimentConfig.from_json_file(path)
        assert back == cfg

    def test_validation_catches_bad_window(self, tmp_path):
        cfg = small_iid_config(tmp_path)
        cfg.W = 7  # T=600 not a multiple
        with pytest.raises(ValueError):
            cfg.validate()

    def test_validation_catches_arrival_overflow(self, tmp_path):
        cfg = small_iid_config(tmp_path)
        cfg.chi = (1.0, 0.2)  # chi+eps > 1
        with pytest.raises(ValueError):
            cfg.validate()

    def test_trace_shorter_than_horizon_is_config_error(self, tmp_path, calibrated_trace_csv):
        cfg = small_iid_config(tmp_path, T=50_000)
        cfg.W = 100
        cfg.K = 3
        cfg.chi = (0.2, 0.2, 0.1)
        cfg.channel = {"kind": "trace", "path": str(calibrated_trace_csv), "schema": "binary"}
        with pytest.raises(ValueError, match="trace has"):
            cfg.build_channel()


class TestPresets:
    def test_abrupt2_parameters(self):
        cfg = harness.preset("abrupt2")
        assert cfg.chi == (0.8, 0.1)
        assert cfg.eta == 100.0
        assert cfg.W == 100
        assert cfg.eps == 0.001
        assert cfg.alpha == 1.0
        segs = cfg.channel["segments"]
        assert segs[1]["start"] == math.ceil(cfg.T / 6)
        assert segs[2]["start"] == math.ceil(2 * cfg.T / 3)
        assert segs[1]["rates"][0] == 0.5

    def test_iid6_shape(self):
        cfg = harness.preset("iid6")
        assert cfg.K == 6
        assert cfg.build_actions().n_actions == 15
        cfg.validate()

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            harness.preset("nope")


class TestLoadTrace:
    def test_rotation(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("t,ch1\n1,1\n2,0\n3,0\n")
        model = harness.load_trace(p, "binary", offset=1)
        assert np.array_equal(model.matrix[:, 0], [0, 0, 1])

    def test_snr_threshold(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("t,snr1,snr2\n1,25.0,15.0\n2,19.9,20.0\n")
        model = harness.load_trace(p, "snr", thresholds=[20.0, 20.0])
        assert np.array_equal(model.matrix, [[1, 0], [0, 1]])

    def test_parse_error_has_line_number(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("t,ch1\n1,1\n2,2\n")
        with pytest.raises(harness.TraceParseError, match=":3:"):
            harness.load_trace(p, "binary")

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("t,ch1,ch2\n1,1,0\n2,1\n")
        with pytest.raises(harness.TraceParseError, match=":3:"):
            harness.load_trace(p, "binary")

    def test_non_consecutive_slots(self, tmp_path):
        p = tmp_path / "t.csv"
        p.write_text("t,ch1\n1,1\n3,0\n")
        with pytest.raises(harness.TraceParseError, match="consecutive"):
            harness.load_trace(p, "binary")

    def test_reference_rates_recovered(self, calibrated_trace_csv):
        model = harness.load_trace(calibrated_trace_csv, "binary")
        means = model.matrix.mean(axis=0)
        assert np.all(np.abs(means - [0.5402, 0.9059, 0.9012]) <= 1e-4)


class TestCsvOutputs:
    def test_headers_and_format(self, tmp_path):
        cfg = small_iid_config(tmp_path)
        res = harness.run_experiment(cfg)
        out = Path(cfg.outputs)
        with (out / "regret.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["policy", "t", "mean", "se"]
        with (out / "throughput.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["policy", "arm", "t", "mean", "se"]
        assert all(int(r[2]) >= cfg.W for r in rows[1:])
        with (out / "tslr.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["policy", "arm", "t", "mean", "se"]
        with (out / "summary.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "policy", "run", "seed", "final_reward", "final_regret", "max_qlen",
            "mean_hol_age_arm1", "mean_hol_age_arm2",
            "mean_tslr_arm1", "mean_tslr_arm2",
        ]
        assert len(rows) == 1 + cfg.runs * len(cfg.policies)
        # nine significant digits on floats
        val = rows[1][4]
        assert len(val.replace("-", "").replace(".", "").replace("e", "").lstrip("0")) <= 10

    def test_single_run_reduces_to_run_once(self, tmp_path):
        cfg = small_iid_config(tmp_path, policies=("age",), runs=1)
        res = harness.run_experiment(cfg)
        rr = harness.run_once(cfg, learning.PolicyKind("age", eta=cfg.eta), 0)
        agg = res.results["age"][0]
        assert np.array_equal(agg.log.actions, rr.log.actions)
        with (Path(cfg.outputs) / "regret.csv").open() as fh:
            rows = list(csv.reader(fh))[1:]
        for row, t, want in zip(rows, rr.log.slots, rr.regret_curve):
            assert float(row[2]) == pytest.approx(want, rel=1e-8)
            assert float(row[3]) == 0.0

    def test_summary_recomputable_from_unstrided_log(self, tmp_path):
        cfg = small_iid_config(tmp_path, policies=("age",), runs=1)
        cfg.log_stride = 1
        rr = harness.run_once(cfg, learning.PolicyKind("age", eta=cfg.eta), 0)
        assert rr.final_reward == rr.log.cum_reward[-1]
        assert rr.final_regret == pytest.approx(
            metrics.pseudo_regret(
                rr.log, cfg.build_actions(), [0.9, 0.7],
                sigma_star_rate=rr.log.oracle_rate[0],
            )
        )
        assert rr.max_qlen == rr.log.queue_lens.max()
        assert np.allclose(rr.mean_hol_age, rr.log.hol_ages.mean(axis=0))
        assert np.allclose(rr.mean_tslr, rr.log.tslr.mean(axis=0))


class TestSeedHygiene:
    def test_adding_policy_leaves_others_untouched(self, tmp_path):
        cfg_a = small_iid_config(tmp_path / "a", policies=("age", "qlen"))
        cfg_b = small_iid_config(tmp_path / "b", policies=("age", "qlen", "tslr"))
        harness.run_experiment(cfg_a)
        harness.run_experiment(cfg_b)
        for name in ("regret.csv", "throughput.csv", "tslr.csv"):
            rows_a = [
                r for r in (Path(cfg_a.outputs) / name).read_text().splitlines()
                if not r.startswith("tslr,")
            ]
            rows_b = [
                r for r in (Path(cfg_b.outputs) / name).read_text().splitlines()
                if not r.startswith("tslr,")
            ]
            assert rows_a == rows_b

    def test_byte_identical_rerun(self, tmp_path):
        cfg1 = small_iid_config(tmp_path / "r1")
        cfg2 = small_iid_config(tmp_path / "r2")
        harness.run_experiment(cfg1)
        harness.run_experiment(cfg2)
        for name in ("regret.csv", "throughput.csv", "tslr.csv", "summary.csv"):
            a = (Path(cfg1.outputs) / name).read_bytes()
            b = (Path(cfg2.outputs) / name).read_bytes()
            assert a == b

    def test_unwritable_output_dir_raises(self, tmp_path):
        blocker = tmp_path / "blocker"
        blocker.write_text("a file, not a directory")
        cfg = small_iid_config(tmp_path, runs=1)
        cfg.outputs = str(blocker / "out")
        with pytest.raises(OSError):
            harness.run_experiment(cfg)

    def test_parallel_matches_serial(self, tmp_path):
        cfg1 = small_iid_config(tmp_path / "s", runs=4)
        cfg2 = small_iid_config(tmp_path / "p", runs=4)
        harness.run_experiment(cfg1, workers=1)
        harness.run_experiment(cfg2, workers=2)
        for name in ("regret.csv", "throughput.csv", "tslr.csv", "summary.csv"):
            a = (Path(cfg1.outputs) / name).read_bytes()
            b = (Path(cfg2.outputs) / name).read_bytes()
            assert a == b


class TestTraceRandomOffset:
    def test_per_run_offsets_differ_and_are_deterministic(self, tmp_path, calibrated_trace_csv):
        cfg = harness.ExperimentConfig(
            K=3, T=1000, W=100, chi=(0.2, 0.2, 0.1), eta=10.0, eps=0.01, alpha=1.0,
            action_set={"kind": "one_of_k"},
            channel={
                "kind": "trace", "path": str(calibrated_trace_csv),
                "schema": "binary", "random_offset_max": 1000,
            },
            policies=("age",), runs=2, base_seed=5, log_stride=100,
        ).validate()
        base = cfg.build_channel()
        c0 = harness.channel_for_run(cfg, base, 0)
        c1 = harness.channel_for_run(cfg, base, 1)
        c0b = harness.channel_for_run(cfg, base, 0)
        assert not np.array_equal(c0.matrix, c1.matrix)
        assert np.array_equal(c0.matrix, c0b.matrix)


class TestStaticEquivalenceProperty:
    def test_empirical_action_mixture_matches_policy_rewards(self):
        # run a causal policy, freeze its empirical action frequencies as a
        # static policy, and compare per-arm reward rates
        T = 40_000
        cfg = harness.ExperimentConfig(
            K=2, T=T, W=100, chi=(0.5, 0.2), eta=10.0, eps=0.01, alpha=1.0,
            action_set={"kind": "one_of_k"},
            channel={"kind": "iid", "rates": [0.9, 0.7]},
            policies=("age",), runs=1, base_seed=31, log_stride=1,
        ).validate()
        acts = cfg.build_actions()
        rr = harness.run_once(cfg, learning.PolicyKind("age", eta=10.0), 0)
        freqs = np.bincount(rr.log.actions, minlength=acts.n_actions) / T
        policy_means = rr.log.rewards.mean(axis=0)

        static = oracle.StaticPolicy(freqs)
        rng = harness.substream(cfg.base_seed, 999, harness.PURPOSE_STATIC)
        idx = oracle.sample_static_many(static, rng, T)
        chan_rngs = [
            harness.substream(cfg.base_seed, 998, harness.PURPOSE_CHANNEL, k)
            for k in range(2)
        ]
        X = env.success_matrix(cfg.build_channel(), T, chan_rngs)
        static_rewards = X * acts.incidence[idx]
        static_means = static_rewards.mean(axis=0)

        # batch-means standard errors on both sides
        def batch_se(mat):
            batches = mat.reshape(20, -1, mat.shape[1]).mean(axis=1)
            return batches.std(axis=0, ddof=1) / math.sqrt(20)

        se = np.sqrt(batch_se(rr.log.rewards) ** 2 + batch_se(static_rewards) ** 2)
        assert np.all(np.abs(policy_means - static_means) <= 3 * se + 1e-12)
