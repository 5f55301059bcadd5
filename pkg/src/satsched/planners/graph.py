"""Longest-weighted-path scheduling over the collect DAG.

Collects are nodes; a directed edge joins collect i to collect j when j
starts after i ends, the slew between their pointing vectors fits in the
gap, and the two collects image different targets.  Node weights are the
image rewards, so the best schedule is the longest weighted path from a
virtual source.  Because nodes sorted by start time are already in
topological order, a single relaxation sweep computes the best cumulative
reward ending at each node; the plan is read back through predecessor
links from the best end node.

The relaxation itself has no memory of which images a path visited, so a
path may still revisit an image through non-adjacent nodes.  Repeats are
resolved afterwards by keeping the earliest collect of each image and
re-validating the slew feasibility of the spliced sequence; the slots the
dropped repeats occupied are then refilled greedily with collects of images
the path never visited, which is what the path objective would have chosen
had it been able to count unique images.
"""

from __future__ import annotations

import math
import time
from bisect import bisect_right

import numpy as np

from ..access import SLEW_ANGLE_TOL, Collect, ConstraintSet, slew_feasible
from .types import TaskPlan, plan_from_collects


def plan_graph(collects: list[Collect], rewards: dict[int, float],
               cs: ConstraintSet) -> TaskPlan:
    """Longest-path schedule over time-sorted ``collects``."""
    t_begin = time.perf_counter()
    if not collects:
        return TaskPlan(planner="graph", entries=(), nominal_reward=0.0,
                        runtime_s=time.perf_counter() - t_begin)
    chain, _ = longest_path(collects, rewards, cs)
    chosen = _dedupe_images(chain, cs)
    chosen = _fill_uncovered_images(chosen, collects, cs)
    return plan_from_collects("graph", chosen, rewards,
                              runtime_s=time.perf_counter() - t_begin)


def longest_path(collects: list[Collect], rewards: dict[int, float],
                 cs: ConstraintSet) -> tuple[list[Collect], float]:
    """Best chain by cumulative node reward and that cumulative reward.

    This is the relaxation itself: repeats of an image through non-adjacent
    nodes still count their node reward here.
    """
    if not collects:
        return [], 0.0
    n = len(collects)
    starts = np.array([c.t_start.seconds for c in collects])
    ends = np.array([c.t_end.seconds for c in collects])
    if np.any(np.diff(starts) < 0):
        raise ValueError("collects must be sorted by start time")
    image_ids = np.array([c.image_id for c in collects])
    node_reward = np.array([rewards[c.image_id] for c in collects])
    p_end = np.array([c.pointing_end for c in collects])
    p_start = np.array([c.pointing_start for c in collects])

    best = np.empty(n)
    pred = np.full(n, -1, dtype=np.int64)
    rate = cs.max_slew_rate

    for j in range(n):
        best[j] = node_reward[j]
        if j == 0:
            continue
        gap = starts[j] - ends[:j]
        ok = gap >= 0.0
        if not ok.any():
            continue
        cos_needed = np.cos(np.minimum(rate * np.maximum(gap, 0.0) + SLEW_ANGLE_TOL, math.pi))
        cos_angle = p_end[:j] @ p_start[j]
        ok &= cos_angle >= cos_needed
        ok &= image_ids[:j] != image_ids[j]
        if ok.any():
            cand = np.where(ok, best[:j], -np.inf)
            i = int(np.argmax(cand))
            if cand[i] > 0.0:
                best[j] = cand[i] + node_reward[j]
                pred[j] = i

    chain: list[Collect] = []
    j = int(np.argmax(best))
    path_reward = float(best[j])
    while j >= 0:
        chain.append(collects[j])
        j = pred[j]
    chain.reverse()
    return chain, path_reward


def _dedupe_images(chain: list[Collect], cs: ConstraintSet) -> list[Collect]:
    """Keep the earliest collect per image and re-check slews across splices."""
    chosen: list[Collect] = []
    seen: set[int] = set()
    for c in chain:
        if c.image_id in seen:
            continue
        if chosen and not slew_feasible(chosen[-1], c, cs.max_slew_rate):
            continue
        chosen.append(c)
        seen.add(c.image_id)
    return chosen


def _fill_uncovered_images(chosen: list[Collect], collects: list[Collect],
                           cs: ConstraintSet) -> list[Collect]:
    """Insert collects of never-visited images into feasible plan gaps.

    Candidates are tried in id (time) order and inserted when the slews from
    the neighbors on both sides fit; each insertion is kept, so the pass is
    greedy and deterministic.
    """
    chosen = list(chosen)
    covered = {c.image_id for c in chosen}
    starts = [c.t_start.seconds for c in chosen]
    for c in collects:
        if c.image_id in covered:
            continue
        pos = bisect_right(starts, c.t_start.seconds)
        if pos > 0 and not slew_feasible(chosen[pos - 1], c, cs.max_slew_rate):
            continue
        if pos < len(chosen) and not slew_feasible(c, chosen[pos], cs.max_slew_rate):
            continue
        chosen.insert(pos, c)
        starts.insert(pos, c.t_start.seconds)
        covered.add(c.image_id)
    return chosen
