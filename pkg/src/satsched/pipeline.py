"""End-to-end run: targets, propagation, windows, Monte Carlo, plans, scores.

Every stage writes its artifact under the output directory and the run
finishes with a manifest recording the fully materialized configuration,
its hash, package versions, per-stage status and timings.  A stage failure
marks the manifest FAILED but leaves completed artifacts in place.

Plan JSON artifacts contain no wall-clock fields, so a rerun of the same
manifest reproduces them byte for byte; runtimes are reported in the
evaluation CSV and the manifest instead.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .access import collects_to_csv, find_opportunities, discretize, opportunities_to_csv, save_targets
from .dynamics import propagate_rk4, trajectory_to_csv
from .evaluation import evaluate_plans, report_to_json, reports_to_csv
from .planners import plan_graph, plan_mdp_forward_search, plan_milp, validate_plan
from .scenario import Scenario, resolve_targets
from .uncertainty import (
    collect_probabilities,
    collect_probabilities_to_json,
    ensemble_windows,
    sample_initial_states,
    window_statistics,
)


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class RunResult:
    out_dir: Path
    manifest: dict
    plans: dict = field(default_factory=dict)
    reports: dict = field(default_factory=dict)


def config_hash(scenario: Scenario) -> str:
    blob = json.dumps(scenario.to_json_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def run_pipeline(scenario: Scenario, out_dir, planners: list[str] | None = None,
                 threads: int = 1) -> RunResult:
    """Run every stage of the scenario, writing artifacts under ``out_dir``."""
    scenario.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    requested = list(planners) if planners is not None else list(scenario.planners.names)

    manifest = {
        "scenario": scenario.to_json_dict(),
        "config_sha256": config_hash(scenario),
        "versions": {"satsched": __version__, "numpy": np.__version__},
        "planners": requested,
        "threads": threads,
        "stages": [],
        "status": "RUNNING",
    }
    result = RunResult(out_dir=out, manifest=manifest)

    def stage(name: str, fn):
        t0 = time.perf_counter()
        try:
            value = fn()
        except Exception as exc:
            manifest["stages"].append(
                {"name": name, "status": "FAILED", "error": str(exc),
                 "elapsed_s": round(time.perf_counter() - t0, 3)}
            )
            manifest["status"] = "FAILED"
            _write_manifest(out, manifest)
            raise StageError(name, exc) from exc
        manifest["stages"].append(
            {"name": name, "status": "OK", "elapsed_s": round(time.perf_counter() - t0, 3)}
        )
        return value

    targets = stage("targets", lambda: _stage_targets(scenario, out))
    nominal_traj = stage("propagate", lambda: _stage_propagate(scenario, out))
    windows = stage("windows", lambda: _stage_windows(scenario, out, nominal_traj, targets))
    collects = stage("discretize", lambda: _stage_discretize(scenario, out, windows, targets, nominal_traj))
    ensemble = stage("mc-stats", lambda: _stage_mc(scenario, out, nominal_traj, windows, targets, threads))
    probs = stage("collect-probabilities", lambda: _stage_probs(out, collects, ensemble))

    cs = scenario.planners.constraint_set()
    rewards = {t.id: t.reward for t in targets}
    collects_by_id = {c.id: c for c in collects}
    t_end = scenario.epoch() + scenario.duration_s

    def plan_stage(name: str):
        def build():
            if name == "graph":
                plan = plan_graph(collects, rewards, cs)
            elif name == "milp":
                warm = result.plans.get("graph")
                plan = plan_milp(collects, rewards, cs,
                                 time_limit_s=scenario.planners.milp_time_limit_s,
                                 warm_start=warm)
            elif name == "mdp":
                plan = plan_mdp_forward_search(
                    collects, rewards, cs, probs,
                    depth=scenario.planners.mdp_depth,
                    t_start=scenario.epoch(), t_end=t_end,
                    discount=scenario.planners.gamma,
                )
            else:
                raise ValueError(f"unknown planner '{name}'")
            validate_plan(plan, collects_by_id, cs)
            with open(out / f"plan_{name}.json", "w") as fh:
                json.dump(plan.to_json_dict(), fh, indent=2, sort_keys=True)
                fh.write("\n")
            return plan

        return build

    for name in requested:
        result.plans[name] = stage(f"plan-{name}", plan_stage(name))

    def evaluate_stage():
        eval_cov = scenario.evaluation.covariance(scenario.uncertainty.sigma_pos_m)
        reports = evaluate_plans(
            list(result.plans.values()), scenario.initial_state(), eval_cov,
            targets, scenario.force_model, scenario.spacecraft,
            scenario.duration_s, scenario.propagation_step_s,
        )
        for name, report in reports.items():
            report_to_json(report, out / f"evaluation_{name}.json")
        reports_to_csv(reports, out / "evaluation.csv")
        return reports

    result.reports = stage("evaluate", evaluate_stage)

    manifest["status"] = "OK"
    manifest["plan_runtimes_s"] = {
        name: round(plan.runtime_s, 3) for name, plan in result.plans.items()
    }
    _write_manifest(out, manifest)
    return result


def _write_manifest(out: Path, manifest: dict) -> None:
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _stage_targets(scenario: Scenario, out: Path):
    targets = resolve_targets(scenario.targets)
    save_targets(targets, out / "targets.json")
    return targets


def _stage_propagate(scenario: Scenario, out: Path):
    traj = propagate_rk4(
        scenario.initial_state(), scenario.spacecraft, scenario.force_model,
        scenario.duration_s, scenario.propagation_step_s,
    )
    trajectory_to_csv(traj, out / "trajectory_nominal.csv")
    return traj


def _stage_windows(scenario: Scenario, out: Path, traj, targets):
    windows = find_opportunities(traj, targets)
    opportunities_to_csv(windows, out / "windows.csv")
    return windows


def _stage_discretize(scenario: Scenario, out: Path, windows, targets, traj):
    collects = discretize(windows, targets, traj)
    collects_to_csv(collects, out / "collects.csv")
    return collects


def _stage_mc(scenario: Scenario, out: Path, nominal_traj, windows, targets, threads: int):
    cov = scenario.uncertainty.covariance()
    samples = sample_initial_states(scenario.initial_state(), cov)
    ensemble = ensemble_windows(
        nominal_traj, windows, samples, targets,
        scenario.spacecraft, scenario.force_model,
        scenario.duration_s, scenario.propagation_step_s,
        cov=cov, threads=threads,
    )
    stats = window_statistics(ensemble)
    stats.to_csv(out / "window_stats.csv")
    diag = {
        "unmatched_windows": ensemble.unmatched_windows,
        "low_sample_buckets": list(stats.low_sample_buckets),
        "mean_duration_s": stats.mean_duration_s,
    }
    with open(out / "mc_diagnostics.json", "w") as fh:
        json.dump(diag, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ensemble


def _stage_probs(out: Path, collects, ensemble):
    table = collect_probabilities(collects, ensemble)
    collect_probabilities_to_json(table, out / "collect_probabilities.json")
    return table
