"""Command-line front end: scenario-driven pipeline and standalone stages.

Exit codes: 0 success, 2 configuration error, 3 stage failure.  The output
root for relative paths can be overridden with SATSCHED_OUTPUT_ROOT.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .access import (
    collects_from_csv,
    collects_to_csv,
    discretize,
    find_opportunities,
    load_targets,
    opportunities_to_csv,
    save_targets,
)
from .dynamics import propagate_rk4, trajectory_from_csv, trajectory_to_csv
from .evaluation import evaluate, report_to_json, reports_to_csv
from .pipeline import StageError, run_pipeline
from .planners import TaskPlan, plan_graph, plan_mdp_forward_search, plan_milp, validate_plan
from .scenario import ConfigError, Scenario, generate_targets
from .uncertainty import (
    collect_probabilities,
    collect_probabilities_from_json,
    collect_probabilities_to_json,
    ensemble_windows,
    sample_initial_states,
    window_statistics,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STAGE = 3


def _out_path(path: str) -> Path:
    root = os.environ.get("SATSCHED_OUTPUT_ROOT")
    p = Path(path)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _load_scenario(path: str) -> Scenario:
    return Scenario.load(path)


def cmd_targets(args) -> int:
    targets = generate_targets(args.count, args.seed, args.reward,
                               args.theta_max_deg, args.collect_duration_s)
    save_targets(targets, _out_path(args.out))
    print(f"wrote {len(targets)} targets to {args.out}")
    return EXIT_OK


def cmd_propagate(args) -> int:
    scenario = _load_scenario(args.scenario)
    traj = propagate_rk4(scenario.initial_state(), scenario.spacecraft,
                         scenario.force_model, scenario.duration_s,
                         scenario.propagation_step_s)
    trajectory_to_csv(traj, _out_path(args.out))
    print(f"propagated {scenario.duration_s:.0f} s at {scenario.propagation_step_s:.0f} s step "
          f"-> {args.out} ({len(traj)} nodes)")
    return EXIT_OK


def cmd_windows(args) -> int:
    scenario = _load_scenario(args.scenario)
    traj = trajectory_from_csv(args.trajectory) if args.trajectory else propagate_rk4(
        scenario.initial_state(), scenario.spacecraft, scenario.force_model,
        scenario.duration_s, scenario.propagation_step_s)
    targets = load_targets(args.targets)
    windows = find_opportunities(traj, targets)
    opportunities_to_csv(windows, _out_path(args.out))
    if args.collects_out:
        collects = discretize(windows, targets, traj)
        collects_to_csv(collects, _out_path(args.collects_out))
    count = sum(len(ws) for ws in windows.values())
    print(f"found {count} windows for {len(targets)} targets -> {args.out}")
    return EXIT_OK


def cmd_mc_stats(args) -> int:
    scenario = _load_scenario(args.scenario)
    targets = load_targets(args.targets)
    traj = propagate_rk4(scenario.initial_state(), scenario.spacecraft,
                         scenario.force_model, scenario.duration_s,
                         scenario.propagation_step_s)
    windows = find_opportunities(traj, targets)
    cov = scenario.uncertainty.covariance()
    samples = sample_initial_states(scenario.initial_state(), cov)
    ensemble = ensemble_windows(traj, windows, samples, targets,
                                scenario.spacecraft, scenario.force_model,
                                scenario.duration_s, scenario.propagation_step_s,
                                cov=cov, threads=args.threads)
    stats = window_statistics(ensemble)
    stats.to_csv(_out_path(args.out))
    if args.probs_out:
        collects = discretize(windows, targets, traj)
        table = collect_probabilities(collects, ensemble)
        collect_probabilities_to_json(table, _out_path(args.probs_out))
    print(f"window statistics over {cov.n_samples} samples -> {args.out}")
    return EXIT_OK


def cmd_plan(args) -> int:
    scenario = _load_scenario(args.scenario)
    targets = load_targets(args.targets)
    collects = collects_from_csv(args.collects)
    rewards = {t.id: t.reward for t in targets}
    cs = scenario.planners.constraint_set()
    t_end = scenario.epoch() + scenario.duration_s

    if args.planner == "graph":
        plan = plan_graph(collects, rewards, cs)
    elif args.planner == "milp":
        plan = plan_milp(collects, rewards, cs,
                         time_limit_s=scenario.planners.milp_time_limit_s)
    elif args.planner == "mdp":
        if not args.probs:
            raise ConfigError("the mdp planner requires --probs")
        probs = collect_probabilities_from_json(args.probs)
        plan = plan_mdp_forward_search(collects, rewards, cs, probs,
                                       depth=scenario.planners.mdp_depth,
                                       t_start=scenario.epoch(), t_end=t_end,
                                       discount=scenario.planners.gamma)
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown planner {args.planner}")
    validate_plan(plan, {c.id: c for c in collects}, cs)
    with open(_out_path(args.out), "w") as fh:
        json.dump(plan.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"{args.planner} plan: {len(plan.entries)} collects, "
          f"nominal reward {plan.nominal_reward:.1f}, {plan.runtime_s:.2f} s -> {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    scenario = _load_scenario(args.scenario)
    targets = load_targets(args.targets)
    with open(args.plan) as fh:
        plan = TaskPlan.from_json_dict(json.load(fh))
    cov = scenario.evaluation.covariance(scenario.uncertainty.sigma_pos_m)
    report = evaluate(plan, scenario.initial_state(), cov, targets,
                      scenario.force_model, scenario.spacecraft,
                      scenario.duration_s, scenario.propagation_step_s)
    report_to_json(report, _out_path(args.out))
    if args.csv:
        reports_to_csv({report.planner: report}, _out_path(args.csv))
    print(f"evaluated {plan.planner}: mean {report.mean_reward:.2f} "
          f"stdev {report.stdev_reward:.2f} over {report.n_samples} samples -> {args.out}")
    return EXIT_OK


def cmd_run(args) -> int:
    scenario = _load_scenario(args.scenario)
    planners = args.planners.split(",") if args.planners else None
    if planners:
        unknown = set(planners) - {"graph", "milp", "mdp"}
        if unknown:
            raise ConfigError(f"unknown planners: {sorted(unknown)}")
    result = run_pipeline(scenario, _out_path(args.out_dir), planners=planners,
                          threads=args.threads)
    for name, report in sorted(result.reports.items()):
        print(f"{name}: nominal {result.plans[name].nominal_reward:.1f}, "
              f"realized {report.mean_reward:.2f} +/- {report.stdev_reward:.2f}")
    print(f"artifacts in {result.out_dir}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="satsched",
        description="Plan and evaluate satellite imaging schedules under orbit uncertainty.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("targets", help="generate a random target set")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--reward", type=float, default=1.0)
    p.add_argument("--theta-max-deg", type=float, default=55.0)
    p.add_argument("--collect-duration-s", type=float, default=10.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_targets)

    p = sub.add_parser("propagate", help="propagate the scenario orbit to CSV")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("windows", help="compute visibility windows (and collects)")
    p.add_argument("--scenario", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--trajectory", help="trajectory CSV (propagates if omitted)")
    p.add_argument("--out", required=True)
    p.add_argument("--collects-out")
    p.set_defaults(func=cmd_windows)

    p = sub.add_parser("mc-stats", help="Monte Carlo window statistics")
    p.add_argument("--scenario", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--probs-out")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_mc_stats)

    p = sub.add_parser("plan", help="compute a plan from collects")
    p.add_argument("--scenario", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--collects", required=True)
    p.add_argument("--planner", choices=["graph", "milp", "mdp"], required=True)
    p.add_argument("--probs", help="collect probability JSON (mdp only)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("evaluate", help="score a plan against sampled truths")
    p.add_argument("--scenario", required=True)
    p.add_argument("--targets", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="full pipeline into an output directory")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--planners", help="comma-separated subset, e.g. graph,mdp")
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
