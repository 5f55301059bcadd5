"""Replay task plans against sampled true trajectories and score them.

A planned collect succeeds on a given "true" trajectory when its time
interval lies entirely inside a single visibility window of its image on
that trajectory; the realized reward of the plan is the summed reward of
images with at least one successful collect.  Evaluation draws the true
trajectories from the orbit-determination error distribution with a seed
stream independent of the ensemble the planner saw.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .access import ImageTarget, Opportunity, find_opportunities
from .astro import StateVector
from .dynamics import ForceModelConfig, ReentryError, SpacecraftParams, Trajectory, propagate_rk4_batch
from .planners import TaskPlan
from .uncertainty import OrbitCovariance, sample_initial_states


@dataclass(frozen=True)
class EvaluationReport:
    """Realized-reward statistics of one plan over the evaluation ensemble."""

    planner: str
    rewards: tuple[float, ...]
    mean_reward: float
    stdev_reward: float
    planning_runtime_s: float
    n_samples: int
    seed: int
    failed_samples: int = 0

    def to_json_dict(self) -> dict:
        return {
            "planner": self.planner,
            "rewards": list(self.rewards),
            "mean_reward": self.mean_reward,
            "stdev_reward": self.stdev_reward,
            "planning_runtime_s": self.planning_runtime_s,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "failed_samples": self.failed_samples,
        }


def realized_reward(plan: TaskPlan, true_traj: Trajectory,
                    targets: list[ImageTarget]) -> float:
    """Reward actually earned by ``plan`` if ``true_traj`` were flown."""
    planned_images = set(plan.image_ids)
    relevant = [t for t in targets if t.id in planned_images]
    windows = find_opportunities(true_traj, relevant)
    return _score(plan, windows, {t.id: t.reward for t in relevant})


def _score(plan: TaskPlan, windows_by_image: dict[int, list[Opportunity]],
           rewards_by_image: dict[int, float]) -> float:
    captured: set[int] = set()
    for entry in plan.entries:
        if entry.image_id in captured:
            continue
        for w in windows_by_image.get(entry.image_id, []):
            if w.t_start.seconds <= entry.t_start.seconds and \
                    entry.t_end.seconds <= w.t_end.seconds:
                captured.add(entry.image_id)
                break
    return float(sum(rewards_by_image[i] for i in captured))


def evaluate(plan: TaskPlan, nominal: StateVector, cov: OrbitCovariance,
             targets: list[ImageTarget], cfg: ForceModelConfig,
             sc: SpacecraftParams, duration: float, step: float = 10.0) -> EvaluationReport:
    """Score one plan against ``cov.n_samples`` sampled true trajectories."""
    return evaluate_plans([plan], nominal, cov, targets, cfg, sc, duration, step)[plan.planner]


def evaluate_plans(plans: list[TaskPlan], nominal: StateVector, cov: OrbitCovariance,
                   targets: list[ImageTarget], cfg: ForceModelConfig,
                   sc: SpacecraftParams, duration: float,
                   step: float = 10.0) -> dict[str, EvaluationReport]:
    """Score several plans against one shared evaluation ensemble.

    Sharing the sampled trajectories across plans is both cheaper and the
    fair comparison (common random numbers).  Samples whose propagation
    fails (re-entry) are excluded and counted per report.
    """
    union_images = set()
    for plan in plans:
        union_images.update(plan.image_ids)
    relevant = [t for t in targets if t.id in union_images]
    rewards_by_image = {t.id: t.reward for t in relevant}

    samples = sample_initial_states(nominal, cov)
    per_sample_windows: list[dict[int, list[Opportunity]] | None] = []
    failed = 0
    try:
        epoch0 = nominal.epoch
        r0 = np.array([s.position for s in samples])
        v0 = np.array([s.velocity for s in samples])
        offsets, states = propagate_rk4_batch(epoch0, r0, v0, sc, cfg, duration, step)
        for i in range(len(samples)):
            traj = Trajectory(epoch0, step, offsets, states[i])
            per_sample_windows.append(find_opportunities(traj, relevant))
    except ReentryError:
        # Batch integration aborts on the first failing member; fall back to
        # per-sample propagation so healthy samples still count.
        per_sample_windows = []
        for s in samples:
            try:
                offsets, states = propagate_rk4_batch(
                    s.epoch, s.position[None, :], s.velocity[None, :], sc, cfg, duration, step
                )
                traj = Trajectory(s.epoch, step, offsets, states[0])
                per_sample_windows.append(find_opportunities(traj, relevant))
            except ReentryError:
                per_sample_windows.append(None)
                failed += 1

    reports = {}
    for plan in plans:
        rewards = tuple(
            _score(plan, windows, rewards_by_image)
            for windows in per_sample_windows
            if windows is not None
        )
        mean = float(np.mean(rewards)) if rewards else 0.0
        stdev = float(np.std(rewards, ddof=1)) if len(rewards) >= 2 else 0.0
        reports[plan.planner] = EvaluationReport(
            planner=plan.planner,
            rewards=rewards,
            mean_reward=mean,
            stdev_reward=stdev,
            planning_runtime_s=plan.runtime_s,
            n_samples=cov.n_samples,
            seed=cov.seed,
            failed_samples=failed,
        )
    return reports


def reports_to_csv(reports: dict[str, EvaluationReport], path) -> None:
    """One row per planner with the headline comparison columns."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["approach", "runtime_s", "mean_reward", "stdev_reward"])
        for name in sorted(reports):
            rep = reports[name]
            writer.writerow([
                rep.planner,
                f"{rep.planning_runtime_s:.3f}",
                f"{rep.mean_reward:.4f}",
                f"{rep.stdev_reward:.4f}",
            ])


def report_to_json(report: EvaluationReport, path) -> None:
    with open(path, "w") as fh:
        json.dump(report.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
