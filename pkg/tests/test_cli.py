"""CLI tests: config handling, CSV output, model round-trips, exit codes."""

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from gmmq.cli import (
    CSV_COLUMNS,
    ConfigError,
    load_model,
    main,
    model_from_dict,
    model_to_dict,
    parse_run_config,
    save_model,
)
from gmmq.envs import acrobot_spec
from gmmq.model import GmmQFunction, WeightLayout, q_eval
from gmmq.policy_iter import moving_average


def minimal_config(tmp_path, **overrides):
    cfg = {
        "env": "pendulum",
        "k": 2,
        "trials": 3,
        "n_seeds": 2,
        "rollout": {"episodes": 2, "steps_per_episode": 15},
        "armijo": {"j_steps": 3},
        "eval": {"step_cap": 30},
        "output_dir": str(tmp_path / "out"),
    }
    cfg.update(overrides)
    path = tmp_path / f"config_{abs(hash(json.dumps(cfg, sort_keys=True)))}.json"
    path.write_text(json.dumps(cfg))
    return path


class TestConfigParsing:
    def test_missing_file_exits_2(self, tmp_path):
        assert main(["run", str(tmp_path / "nope.json")]) == 2

    def test_invalid_json_exits_2_with_location(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"env": "pendulum",\n  "k": }')
        assert main(["run", str(bad)]) == 2
        err = capsys.readouterr().err
        assert ":2:" in err  # line-precise

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown top-level"):
            parse_run_config({"env": "pendulum", "k": 2, "typo_key": 1})

    def test_missing_k_rejected(self):
        with pytest.raises(ConfigError, match="'k'"):
            parse_run_config({"env": "pendulum"})

    def test_acrobot_defaults_to_per_action(self):
        cfg = parse_run_config({"env": "acrobot", "k": 3})
        assert cfg.pi.layout is WeightLayout.PER_ACTION

    def test_env_spec_object_accepted(self):
        doc = acrobot_spec().to_dict()
        cfg = parse_run_config({"env": doc, "k": 2})
        assert cfg.pi.env.name == "acrobot"

    def test_env_var_overrides_output_dir(self, monkeypatch):
        monkeypatch.setenv("GMMQ_OUT", "/tmp/elsewhere")
        cfg = parse_run_config({"env": "pendulum", "k": 1, "output_dir": "ignored"})
        assert cfg.output_dir == "/tmp/elsewhere"


class TestRunCommand:
    def test_minimal_run_produces_expected_rows(self, tmp_path):
        path = minimal_config(tmp_path)
        assert main(["run", str(path)]) == 0
        out = tmp_path / "out"
        with (out / "results.csv").open() as fh:
            rows = list(csv.reader(fh))
        assert tuple(rows[0]) == CSV_COLUMNS
        assert len(rows) - 1 == 3 * 2  # trials x seeds

        resolved = json.loads((out / "config_resolved.json").read_text())
        # every default is echoed back
        assert resolved["metric"] == "affi"
        assert resolved["discount"] == pytest.approx(0.97)
        assert resolved["armijo"]["beta"] == 0.5
        assert resolved["emit"] == {"csv": True, "json": False}

    def test_rows_deterministic_except_timing(self, tmp_path):
        path_a = minimal_config(tmp_path, output_dir=str(tmp_path / "a"))
        path_b = minimal_config(tmp_path, output_dir=str(tmp_path / "b"))
        assert main(["run", str(path_a)]) == 0
        assert main(["run", str(path_b)]) == 0
        rows_a = (tmp_path / "a" / "results.csv").read_text().splitlines()
        rows_b = (tmp_path / "b" / "results.csv").read_text().splitlines()
        strip = lambda lines: ["," .join(r.split(",")[:-1]) for r in lines]
        assert strip(rows_a) == strip(rows_b)

    def test_ma10_column_matches_moving_average(self, tmp_path):
        path = minimal_config(tmp_path)
        assert main(["run", str(path)]) == 0
        with (tmp_path / "out" / "results.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        for seed in {r["seed"] for r in rows}:
            series = [float(r["steps_to_goal"]) for r in rows if r["seed"] == seed]
            smoothed = [float(r["steps_to_goal_ma10"]) for r in rows if r["seed"] == seed]
            np.testing.assert_array_equal(moving_average(series, 10), smoothed)

    def test_sweep_emits_one_block_per_k(self, tmp_path):
        path = minimal_config(tmp_path, sweep=[1, 2], n_seeds=1)
        assert main(["run", str(path)]) == 0
        with (tmp_path / "out" / "results.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert sorted({r["k"] for r in rows}) == ["1", "2"]
        assert (tmp_path / "out" / "model_k1_seed0.json").exists()
        assert (tmp_path / "out" / "model_k2_seed0.json").exists()


class TestModelSerialization:
    def test_round_trip_preserves_q_values(self, tmp_path):
        rng = np.random.default_rng(0)
        covs = np.stack([np.eye(3) * s for s in (0.7, 1.3)])
        model = GmmQFunction(weights=rng.normal(size=2), means=rng.normal(size=(2, 3)), covs=covs)
        path = tmp_path / "model.json"
        save_model(model, path)
        clone = load_model(path)
        np.testing.assert_array_equal(clone.weights, model.weights)
        np.testing.assert_array_equal(clone.means, model.means)
        np.testing.assert_array_equal(clone.covs, model.covs)
        for _ in range(5):
            z = rng.normal(size=3)
            assert abs(q_eval(clone, z) - q_eval(model, z)) <= 1e-15

    def test_per_action_round_trip(self):
        rng = np.random.default_rng(1)
        model = GmmQFunction(weights=rng.normal(size=(3, 2)), means=rng.normal(size=(2, 4)),
                             covs=np.stack([np.eye(4)] * 2))
        doc = json.loads(json.dumps(model_to_dict(model)))
        clone = model_from_dict(doc)
        assert clone.layout is WeightLayout.PER_ACTION
        np.testing.assert_array_equal(clone.weights, model.weights)


class TestEvalCommand:
    def test_eval_prints_capped_episode(self, tmp_path, capsys):
        rng = np.random.default_rng(2)
        model = GmmQFunction(weights=rng.normal(size=2), means=rng.normal(size=(2, 3)),
                             covs=np.stack([np.eye(3)] * 2))
        path = tmp_path / "model.json"
        save_model(model, path)
        assert main(["eval", str(path), "--env", "pendulum", "--step-cap", "25"]) == 0
        out = capsys.readouterr().out
        assert "episode 1:" in out
        steps = int(out.strip().split()[-2])
        assert 1 <= steps <= 25

    def test_bad_model_file_exits_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        assert main(["eval", str(bad), "--env", "pendulum"]) == 2


class TestGradcheckCommand:
    def test_passes_and_prints_every_cell(self, capsys):
        assert main(["gradcheck", "--trials", "2", "--seed", "3"]) == 0
        out = capsys.readouterr().out
        assert out.count("max rel err") == 12  # 2 metrics x 2 layouts x 3 blocks
        assert "PASS" in out

    def test_corrupted_sign_fails(self, capsys):
        assert main(["gradcheck", "--trials", "1", "--corrupt-sign"]) == 1
        assert "FAIL" in capsys.readouterr().out


class TestOracleCommand:
    def test_machine_readable_summary(self, capsys):
        assert main(["oracle", "--pi-trials", "0"]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["ok"] is True
        assert summary["contraction_excess_max"] <= 1e-12
        assert summary["banach_picard_decay_ok"] is True
        assert summary["slln_monotone"] is True


class TestConsoleEntryPoint:
    def test_module_invocation(self):
        proc = subprocess.run(
            [sys.executable, "-m", "gmmq.cli", "gradcheck", "--trials", "1"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
