import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats as scipy_stats

from satsched.cli import main
from satsched.scenario import ConfigError, Scenario, generate_targets

SMALL_SCENARIO = {
    "name": "tiny",
    "start_epoch": "2026-03-21T00:00:00",
    "duration_s": 5700.0,
    "orbit": {"altitude_m": 550e3, "inclination_deg": 90.0},
    "force_model": {
        "gravity_degree": 2, "gravity_order": 0, "drag": False, "srp": False,
        "third_body_sun": False, "third_body_moon": False, "relativity": False,
    },
    "targets": {"count": 15, "seed": 3},
    "uncertainty": {"sigma_pos_m": 2500.0, "n_samples": 3, "seed": 11},
    "planners": {"names": ["graph", "milp", "mdp"], "milp_time_limit_s": 5.0},
    "evaluation": {"n_samples": 3, "seed": 12},
}


@pytest.fixture
def scenario_file(tmp_path):
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(SMALL_SCENARIO))
    return path


class TestGenerateTargets:
    def test_deterministic_by_seed(self, tmp_path):
        from satsched.access import save_targets

        a = generate_targets(600, seed=7)
        b = generate_targets(600, seed=7)
        pa, pb = tmp_path / "a.json", tmp_path / "b.json"
        save_targets(a, pa)
        save_targets(b, pb)
        assert pa.read_bytes() == pb.read_bytes()
        assert len(a) == 600

    def test_single_target_valid(self):
        t = generate_targets(1, seed=1)[0]
        assert -math.pi / 2 <= t.center.latitude <= math.pi / 2
        assert -math.pi <= t.center.longitude < math.pi

    def test_sin_latitude_uniform(self):
        targets = generate_targets(10000, seed=5)
        sin_lat = np.array([math.sin(t.center.latitude) for t in targets])
        result = scipy_stats.kstest(sin_lat, "uniform", args=(-1.0, 2.0))
        critical_1pct = 1.63 / math.sqrt(len(sin_lat))
        assert result.statistic < critical_1pct

    def test_count_validation(self):
        with pytest.raises(ConfigError):
            generate_targets(0, seed=1)


class TestScenario:
    def test_defaults_materialized(self, scenario_file, tmp_path):
        scenario = Scenario.load(scenario_file)
        doc = scenario.to_json_dict()
        # Fields absent from the input file are pinned in the materialized dict.
        assert doc["propagation_step_s"] == 10.0
        assert doc["spacecraft"]["mass"] == 100.0
        assert doc["planners"]["mdp_depth"] == 2
        assert doc["orbit"]["eccentricity"] == 0.0

    def test_validation_errors(self):
        with pytest.raises(ConfigError):
            Scenario.from_json_dict({"duration_s": -1})
        with pytest.raises(ConfigError):
            Scenario.from_json_dict({"orbit": {"altitude_m": 100e3}})
        with pytest.raises(ConfigError):
            Scenario.from_json_dict({"planners": {"names": ["simplex"]}})
        with pytest.raises(ConfigError):
            Scenario.from_json_dict({"start_epoch": "not-a-date"})

    def test_initial_state_circular_radius_speed(self):
        scenario = Scenario.from_json_dict(dict(SMALL_SCENARIO))
        st = scenario.initial_state()
        r = np.linalg.norm(st.position)
        v = np.linalg.norm(st.velocity)
        assert r == pytest.approx(6378137.0 + 550e3)
        assert v == pytest.approx(math.sqrt(3.986004415e14 / r), rel=1e-9)
        # Polar orbit: velocity confined to the x/z plane at the ascending node.
        assert abs(st.velocity[1]) < 1e-9

    def test_missing_file_is_config_error(self):
        with pytest.raises(ConfigError):
            Scenario.load("/nonexistent/scenario.json")


class TestCli:
    def test_targets_command(self, tmp_path):
        out = tmp_path / "targets.json"
        code = main(["targets", "--count", "10", "--seed", "2", "--out", str(out)])
        assert code == 0
        assert len(json.loads(out.read_text())) == 10

    def test_full_pipeline_and_stage_commands(self, scenario_file, tmp_path):
        out_dir = tmp_path / "run"
        code = main(["run", "--scenario", str(scenario_file), "--out-dir", str(out_dir)])
        assert code == 0
        for name in ["targets.json", "trajectory_nominal.csv", "windows.csv",
                     "collects.csv", "window_stats.csv", "collect_probabilities.json",
                     "plan_graph.json", "plan_milp.json", "plan_mdp.json",
                     "evaluation.csv", "manifest.json"]:
            assert (out_dir / name).exists(), name
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["status"] == "OK"
        assert manifest["config_sha256"]
        assert all(s["status"] == "OK" for s in manifest["stages"])

        # Stage commands consuming the run artifacts.
        plan_out = tmp_path / "replan.json"
        code = main([
            "plan", "--scenario", str(scenario_file),
            "--targets", str(out_dir / "targets.json"),
            "--collects", str(out_dir / "collects.csv"),
            "--planner", "graph", "--out", str(plan_out),
        ])
        assert code == 0
        replan = json.loads(plan_out.read_text())
        original = json.loads((out_dir / "plan_graph.json").read_text())
        assert replan == original

        eval_out = tmp_path / "eval.json"
        code = main([
            "evaluate", "--scenario", str(scenario_file),
            "--targets", str(out_dir / "targets.json"),
            "--plan", str(plan_out), "--out", str(eval_out),
        ])
        assert code == 0
        assert "mean_reward" in json.loads(eval_out.read_text())

    def test_planner_subset_flag(self, scenario_file, tmp_path):
        out_dir = tmp_path / "subset"
        code = main(["run", "--scenario", str(scenario_file),
                     "--out-dir", str(out_dir), "--planners", "graph,mdp"])
        assert code == 0
        assert (out_dir / "plan_graph.json").exists()
        assert (out_dir / "plan_mdp.json").exists()
        assert not (out_dir / "plan_milp.json").exists()

    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"duration_s": -5}))
        code = main(["run", "--scenario", str(bad), "--out-dir", str(tmp_path / "x")])
        assert code == 2

    def test_missing_scenario_exit_code(self, tmp_path):
        code = main(["propagate", "--scenario", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "t.csv")])
        assert code == 2

    def test_stage_failure_exit_code_and_failed_manifest(self, tmp_path):
        # A target file that vanishes between validation and the stage run is
        # awkward to stage; instead force a stage failure with a re-entering
        # orbit (apogee inside the atmosphere floor is rejected as config, so
        # use a scenario whose propagation decays: eccentric orbit dipping low).
        doc = dict(SMALL_SCENARIO)
        doc["orbit"] = {"altitude_m": 250e3, "inclination_deg": 90.0,
                        "eccentricity": 0.04, "true_anomaly_deg": 180.0}
        doc["force_model"] = dict(doc["force_model"])
        scen = tmp_path / "reentry.json"
        scen.write_text(json.dumps(doc))
        out_dir = tmp_path / "fail"
        code = main(["run", "--scenario", str(scen), "--out-dir", str(out_dir)])
        assert code == 3
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert manifest["status"] == "FAILED"
        assert any(s["status"] == "FAILED" for s in manifest["stages"])

    def test_output_root_env_var(self, scenario_file, tmp_path, monkeypatch):
        monkeypatch.setenv("SATSCHED_OUTPUT_ROOT", str(tmp_path))
        code = main(["targets", "--count", "3", "--seed", "1", "--out", "rooted.json"])
        assert code == 0
        assert (tmp_path / "rooted.json").exists()

    def test_console_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "satsched.cli", "--help"],
                              capture_output=True, text=True)
        assert proc.returncode == 0
        assert "satsched" in proc.stdout
