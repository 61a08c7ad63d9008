"""End-to-end command tests at tiny scale: file formats, exit codes,
determinism."""

import csv
import json

import numpy as np
import pytest

from battcal import cli
from battcal.cli import main, read_dataset_csv
from battcal.configio import (DEFAULT_CONFIG_TEXT, build_run_config,
                              load_run_config, parse_config_text)
from battcal.errors import ConfigInvalid

TINY_CONFIG = """
run.target = r_o
dataset.count = 8
dataset.max_steps = 300
lac.total_steps = 150
lac.warmup_steps = 40
lac.batch_size = 16
lac.hidden = 16, 16
lac.buffer_capacity = 5000
supervised.epochs = 2
supervised.hidden = 16, 16
"""


@pytest.fixture()
def tiny(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(TINY_CONFIG)
    return cfg, tmp_path / "out"


def run(argv):
    return main([str(a) for a in argv])


class TestConfigIO:
    def test_defaults_text_parses(self):
        values = parse_config_text(DEFAULT_CONFIG_TEXT)
        build_run_config(values)

    def test_empty_config_is_valid(self):
        load_run_config(None)

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigInvalid):
            parse_config_text("no.such.key = 1")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigInvalid):
            parse_config_text("lac.gamma = fast")

    def test_desk_profile_sizes(self):
        rc = build_run_config({}, desk=True)
        assert rc.dataset.count == 500
        assert rc.lac.total_steps == 100_000

    def test_full_scale_defaults(self):
        rc = build_run_config({})
        assert rc.dataset.count == 5500
        assert rc.lac.total_steps == 1_000_000

    def test_seed_override(self):
        rc = build_run_config({"run.seed": 3}, seed_override=11)
        assert rc.seed == 11 and rc.dataset.seed == 11


class TestGenerate:
    def test_writes_dataset_and_manifest(self, tiny):
        cfg, out = tiny
        assert run(["generate", "--config", cfg, "--out", out]) == 0
        train, test = read_dataset_csv(out / "dataset.csv")
        assert len(train) == 6 and len(test) == 2
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["train_count"] == 6
        assert manifest["test_count"] == 2

    def test_rerun_identical_outputs(self, tiny, tmp_path):
        cfg, _ = tiny
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert run(["generate", "--config", cfg, "--out", out_a]) == 0
        assert run(["generate", "--config", cfg, "--out", out_b]) == 0
        assert (out_a / "dataset.csv").read_bytes() == \
            (out_b / "dataset.csv").read_bytes()
        assert (out_a / "manifest.json").read_bytes() == \
            (out_b / "manifest.json").read_bytes()

    def test_dataset_roundtrip_exact(self, tiny):
        cfg, out = tiny
        run(["generate", "--config", cfg, "--out", out])
        from battcal.configio import load_run_config
        from battcal import datagen
        rc = load_run_config(str(cfg))
        ds = datagen.generate(rc.dataset)
        train, test = read_dataset_csv(out / "dataset.csv")
        by_id = {t.trajectory_id: t for t in train + test}
        for traj in ds.trajectories:
            loaded = by_id[traj.trajectory_id]
            assert np.array_equal(loaded.states, traj.states)
            assert np.array_equal(loaded.voltages, traj.voltages)
            assert np.array_equal(loaded.loads.currents, traj.loads.currents)
            assert loaded.params == traj.params

    def test_invalid_range_exit_code(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("range.r_o = 0.3, 0.1\n")
        assert run(["generate", "--config", cfg,
                    "--out", tmp_path / "o"]) == 2


class TestTrainRl:
    def test_zero_steps_yields_valid_checkpoint(self, tiny, tmp_path):
        cfg, out = tiny
        run(["generate", "--config", cfg, "--out", out])
        zero = tmp_path / "zero.cfg"
        zero.write_text(TINY_CONFIG + "lac.total_steps = 0\n")
        assert run(["train-rl", "--config", zero, "--out", out]) == 0
        from battcal import checkpoint
        agent, _ = checkpoint.load_rl(out / "rl_checkpoint.json")
        assert agent.total_steps_trained == 0

    def test_training_log_schema_and_determinism(self, tiny, tmp_path):
        cfg, out = tiny
        run(["generate", "--config", cfg, "--out", out])
        assert run(["train-rl", "--config", cfg, "--out", out]) == 0
        log = (out / "rl_training_log.csv").read_bytes()
        header = log.split(b"\n", 1)[0].decode()
        assert header == ",".join(cli.TRAINING_LOG_COLUMNS)
        out2 = tmp_path / "out2"
        run(["generate", "--config", cfg, "--out", out2])
        run(["train-rl", "--config", cfg, "--out", out2])
        assert (out2 / "rl_training_log.csv").read_bytes() == log
        assert (out2 / "rl_checkpoint.json").read_bytes() == \
            (out / "rl_checkpoint.json").read_bytes()

    def test_resume_continues_counter(self, tiny):
        cfg, out = tiny
        run(["generate", "--config", cfg, "--out", out])
        run(["train-rl", "--config", cfg, "--out", out])
        assert run(["train-rl", "--config", cfg, "--out", out,
                    "--resume", out / "rl_checkpoint.json"]) == 0
        from battcal import checkpoint
        agent, _ = checkpoint.load_rl(out / "rl_checkpoint.json")
        assert agent.total_steps_trained == 300

    def test_missing_dataset_exit_code(self, tiny):
        cfg, out = tiny
        assert run(["train-rl", "--config", cfg, "--out", out]) == 3


class TestTrainSupervised:
    def test_writes_checkpoint_and_log(self, tiny):
        cfg, out = tiny
        run(["generate", "--config", cfg, "--out", out])
        assert run(["train-supervised", "--config", cfg, "--out", out]) == 0
        rows = (out / "supervised_training_log.csv").read_text().splitlines()
        assert rows[0] == "epoch,train_mse"
        assert len(rows) == 3  # header + 2 epochs
        mses = [float(r.split(",")[1]) for r in rows[1:]]
        assert mses[-1] <= mses[0]

    def test_determinism(self, tiny, tmp_path):
        cfg, out = tiny
        run(["generate", "--config", cfg, "--out", out])
        run(["train-supervised", "--config", cfg, "--out", out])
        a = (out / "supervised_checkpoint.json").read_bytes()
        out2 = tmp_path / "s2"
        run(["generate", "--config", cfg, "--out", out2])
        run(["train-supervised", "--config", cfg, "--out", out2])
        assert (out2 / "supervised_checkpoint.json").read_bytes() == a


class TestEvaluate:
    @pytest.fixture()
    def trained(self, tiny):
        cfg, out = tiny
        run(["generate", "--config", cfg, "--out", out])
        run(["train-rl", "--config", cfg, "--out", out])
        run(["train-supervised", "--config", cfg, "--out", out])
        return cfg, out

    def test_rl_evaluation_outputs(self, trained):
        cfg, out = trained
        assert run(["evaluate", "--config", cfg, "--out", out,
                    "--checkpoint", out / "rl_checkpoint.json",
                    "--mode", "rl"]) == 0
        _, test = read_dataset_csv(out / "dataset.csv")
        with open(out / "tracking_rl.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == sum(len(t) for t in test)
        report = (out / "eval_report_rl.csv").read_text().splitlines()
        assert report[0] == ",".join(cli.REPORT_COLUMNS)

    def test_aggregates_match_tracking_recomputation(self, trained):
        cfg, out = trained
        run(["evaluate", "--config", cfg, "--out", out,
             "--checkpoint", out / "rl_checkpoint.json", "--mode", "rl"])
        with open(out / "tracking_rl.csv") as fh:
            rows = list(csv.DictReader(fh))
        per_traj = {}
        for r in rows:
            per_traj.setdefault(r["trajectory_id"], []).append(
                (float(r["true_param"]), float(r["inferred_param"])))
        rel_errors = []
        for pairs in per_traj.values():
            errs = [abs(i - t) / abs(t) for t, i in pairs]
            rel_errors.append(np.mean(errs))
        expected = float(np.mean(rel_errors))
        with open(out / "eval_report_rl.csv") as fh:
            agg = [r for r in csv.DictReader(fh)
                   if r["trajectory_id"] == "aggregate"][0]
        assert float(agg["mean_rel_error"]) == pytest.approx(expected,
                                                             rel=1e-12)

    def test_kind_mismatch_exit_code(self, trained):
        cfg, out = trained
        assert run(["evaluate", "--config", cfg, "--out", out,
                    "--checkpoint", out / "supervised_checkpoint.json",
                    "--mode", "rl"]) == 4

    def test_supervised_evaluation(self, trained):
        cfg, out = trained
        assert run(["evaluate", "--config", cfg, "--out", out,
                    "--checkpoint", out / "supervised_checkpoint.json",
                    "--mode", "supervised"]) == 0
        assert (out / "tracking_supervised.csv").exists()

    def test_parallel_evaluation_identical(self, trained, tmp_path):
        cfg, out = trained
        run(["evaluate", "--config", cfg, "--out", out,
             "--checkpoint", out / "rl_checkpoint.json", "--mode", "rl"])
        serial = (out / "tracking_rl.csv").read_bytes()
        run(["evaluate", "--config", cfg, "--out", out,
             "--checkpoint", out / "rl_checkpoint.json", "--mode", "rl",
             "--jobs", "2"])
        assert (out / "tracking_rl.csv").read_bytes() == serial

    def test_oracle_agent_zero_error(self, tiny):
        from battcal.configio import load_run_config
        from battcal.evaluate import OracleAgent, evaluate_rl
        cfg, out = tiny
        run(["generate", "--config", cfg, "--out", out])
        _, test = read_dataset_csv(out / "dataset.csv")
        rc = load_run_config(str(cfg))
        env_config = rc.env_config()
        report, _ = evaluate_rl(OracleAgent(env_config), test, env_config)
        assert float(report.mean_rel_error[0]) == pytest.approx(0.0,
                                                                abs=1e-9)
