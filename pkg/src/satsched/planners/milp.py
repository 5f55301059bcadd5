"""Binary-program formulation of collect selection and its branch-and-bound solver.

One binary variable per collect, an at-most-one row per image, and a
mutual-exclusion row for every pair of collects that cannot both be flown
(neither ordering of the pair satisfies the slew-rate constraint).  The
objective is the summed image reward of selected collects.

The solver is a best-first branch-and-bound over the binary variables.
The bound at a node is the reward already locked in plus the rewards of
all images that are uncovered but still have at least one selectable
collect, which never underestimates the best completion.  Variables are
branched in reward-density order (selection branch first), so deep dives
produce good incumbents early; with a time limit the best incumbent is
returned and flagged non-optimal.
"""

from __future__ import annotations

import heapq
import math
import time
from bisect import bisect_right
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..access import SLEW_ANGLE_TOL, Collect, ConstraintSet
from .types import TaskPlan, plan_from_collects


@dataclass(frozen=True)
class MilpModel:
    """Binary variables per collect with packing and exclusion structure."""

    collect_ids: tuple[int, ...]
    objective: tuple[float, ...]
    at_most_one: tuple[tuple[int, ...], ...]  # variable-index groups, one per image
    exclusions: tuple[tuple[int, int], ...]  # conflicting variable-index pairs
    image_ids: tuple[int, ...]  # image of each variable

    def __post_init__(self):
        counts = {}
        for group in self.at_most_one:
            for v in group:
                counts[v] = counts.get(v, 0) + 1
        if any(counts.get(v, 0) != 1 for v in range(len(self.collect_ids))):
            raise ValueError("every variable must appear in exactly one at-most-one row")
        if any(a == b for a, b in self.exclusions):
            raise ValueError("exclusion rows must reference distinct variables")

    def to_lp_text(self) -> str:
        """Serialize in LP text format for cross-checking with external solvers."""
        lines = ["Maximize", " obj: " + " + ".join(
            f"{coef:.12g} x{v}" for v, coef in enumerate(self.objective)
        ), "Subject To"]
        row = 0
        for group in self.at_most_one:
            row += 1
            lines.append(f" img{row}: " + " + ".join(f"x{v}" for v in group) + " <= 1")
        for k, (a, b) in enumerate(self.exclusions):
            lines.append(f" excl{k}: x{a} + x{b} <= 1")
        lines.append("Binary")
        lines.append(" " + " ".join(f"x{v}" for v in range(len(self.objective))))
        lines.append("End")
        return "\n".join(lines) + "\n"


def build_milp_model(collects: list[Collect], rewards: dict[int, float],
                     cs: ConstraintSet) -> MilpModel:
    """Assemble the binary program for time-sorted ``collects``."""
    n = len(collects)
    starts = np.array([c.t_start.seconds for c in collects])
    ends = np.array([c.t_end.seconds for c in collects])
    image_ids = [c.image_id for c in collects]
    p_start = np.array([c.pointing_start for c in collects]) if n else np.zeros((0, 3))
    p_end = np.array([c.pointing_end for c in collects]) if n else np.zeros((0, 3))

    groups: dict[int, list[int]] = {}
    for v, img in enumerate(image_ids):
        groups.setdefault(img, []).append(v)

    # Pairs farther apart than a max-angle slew are always compatible, so the
    # conflict scan per collect stops once that much gap has opened.
    horizon = math.pi / cs.max_slew_rate
    starts_list = starts.tolist()
    exclusions: list[tuple[int, int]] = []
    for k in range(n):
        hi = bisect_right(starts_list, ends[k] + horizon, lo=k + 1)
        if hi <= k + 1:
            continue
        idx = np.arange(k + 1, hi)
        same = np.array([image_ids[i] == image_ids[k] for i in idx])
        gap = starts[idx] - ends[k]
        cos_needed = np.cos(np.minimum(cs.max_slew_rate * np.maximum(gap, 0.0) + SLEW_ANGLE_TOL, math.pi))
        cos_angle = p_end[k] @ p_start[idx].T
        forward_ok = (gap >= 0.0) & (cos_angle >= cos_needed)
        # Reverse ordering (later collect flown first) is impossible here:
        # idx starts strictly after k, so l before k fails time ordering
        # unless the two overlap, which forward_ok already rejects.
        conflict = ~forward_ok & ~same
        for i in idx[conflict]:
            exclusions.append((k, int(i)))

    return MilpModel(
        collect_ids=tuple(c.id for c in collects),
        objective=tuple(float(rewards[img]) for img in image_ids),
        at_most_one=tuple(tuple(v) for v in groups.values()),
        exclusions=tuple(exclusions),
        image_ids=tuple(image_ids),
    )


def plan_milp(collects: list[Collect], rewards: dict[int, float], cs: ConstraintSet,
              time_limit_s: float = 60.0, warm_start: Optional[TaskPlan] = None,
              max_nodes: int = 500_000) -> TaskPlan:
    """Best-first branch-and-bound over the binary collect-selection program.

    Returns the proven-optimal plan when the search completes, otherwise the
    best incumbent found before ``time_limit_s`` (or the node cap) with
    ``optimal=False``.  ``warm_start`` seeds the incumbent with a known plan
    (checked for feasibility first), the usual MIP warm-start practice.
    """
    t_begin = time.perf_counter()
    n = len(collects)
    if n == 0:
        return TaskPlan(planner="milp", entries=(), nominal_reward=0.0,
                        runtime_s=time.perf_counter() - t_begin, optimal=True)

    model = build_milp_model(collects, rewards, cs)
    obj = np.array(model.objective)
    durations = np.array([c.t_end.seconds - c.t_start.seconds for c in collects])
    starts = [c.t_start.seconds for c in collects]

    # Conflict masks as big integers (variable-index bitsets).
    conflict_mask = [0] * n
    for a, b in model.exclusions:
        conflict_mask[a] |= 1 << b
        conflict_mask[b] |= 1 << a

    image_index = {}
    for img in model.image_ids:
        image_index.setdefault(img, len(image_index))
    n_images = len(image_index)
    img_of_var = [image_index[img] for img in model.image_ids]
    image_reward = [0.0] * n_images
    var_mask_of_image = [0] * n_images
    for v in range(n):
        image_reward[img_of_var[v]] = float(obj[v])
        var_mask_of_image[img_of_var[v]] |= 1 << v

    # Branch order: reward density (reward per second of collect), then time.
    density = obj / durations
    order = sorted(range(n), key=lambda v: (-density[v], starts[v], v))
    suffix_mask = [0] * (n + 1)
    for p in range(n - 1, -1, -1):
        suffix_mask[p] = suffix_mask[p + 1] | (1 << order[p])

    def greedy() -> list[int]:
        taken: list[int] = []
        banned = 0
        covered = 0
        for v in order:
            bit = 1 << v
            img_bit = 1 << img_of_var[v]
            if banned & bit or covered & img_bit:
                continue
            taken.append(v)
            banned |= conflict_mask[v]
            covered |= img_bit
        return taken

    def value_of(vars_: list[int]) -> float:
        return float(sum(obj[v] for v in vars_))

    def feasible_set(vars_: list[int]) -> bool:
        seen_imgs = set()
        for v in vars_:
            if img_of_var[v] in seen_imgs:
                return False
            seen_imgs.add(img_of_var[v])
        for i, a in enumerate(vars_):
            for b in vars_[i + 1:]:
                if conflict_mask[a] & (1 << b):
                    return False
        return True

    best_vars = greedy()
    best_value = value_of(best_vars)
    if warm_start is not None:
        id_to_var = {cid: v for v, cid in enumerate(model.collect_ids)}
        ws_vars = [id_to_var[e.collect_id] for e in warm_start.entries
                   if e.collect_id in id_to_var]
        if len(ws_vars) == len(warm_start.entries) and feasible_set(ws_vars):
            ws_value = value_of(ws_vars)
            if ws_value > best_value:
                best_vars, best_value = ws_vars, ws_value

    optimal = False
    if time_limit_s > 0.0:
        deadline = t_begin + time_limit_s
        root_potential = float(sum(image_reward))
        counter = 0
        # Node: (-ub, counter, ptr, chosen_chain, banned, covered_mask, locked_reward, potential)
        heap = [(-root_potential, counter, 0, None, 0, 0, 0.0, root_potential)]
        nodes = 0
        timed_out = False

        def availability_drop(banned_before: int, banned_after: int, covered_mask: int,
                              touched: int, ptr: int, ptr_child: int) -> float:
            """Reward of images whose last selectable collect just disappeared.

            Compares availability before and after the transition so an
            image already dropped from the potential is never dropped twice.
            """
            drop = 0.0
            seen = 0
            while touched:
                bit = touched & -touched
                touched ^= bit
                img = img_of_var[bit.bit_length() - 1]
                img_bit = 1 << img
                if seen & img_bit or covered_mask & img_bit:
                    continue
                seen |= img_bit
                m = var_mask_of_image[img]
                was = m & suffix_mask[ptr] & ~banned_before
                now = m & suffix_mask[ptr_child] & ~banned_after
                if was and not now:
                    drop += image_reward[img]
            return drop

        while heap:
            nodes += 1
            if nodes % 128 == 0 and time.perf_counter() > deadline:
                timed_out = True
                break
            if nodes > max_nodes:
                timed_out = True
                break
            neg_ub, _, ptr, chain, banned, covered_mask, locked, potential = heapq.heappop(heap)
            if -neg_ub <= best_value + 1e-12:
                continue
            # Skip variables already decided implicitly.
            while ptr < n:
                v = order[ptr]
                if banned & (1 << v) or covered_mask & (1 << img_of_var[v]):
                    ptr += 1
                else:
                    break
            if ptr >= n:
                continue  # leaf; locked reward was already offered as incumbent
            v = order[ptr]
            v_bit = 1 << v
            img = img_of_var[v]
            img_bit = 1 << img

            # Selection branch.
            sel_banned = banned | conflict_mask[v]
            sel_covered = covered_mask | img_bit
            sel_locked = locked + image_reward[img]
            newly_banned = (sel_banned & ~banned) & suffix_mask[ptr + 1]
            sel_potential = potential - image_reward[img] - availability_drop(
                banned, sel_banned, sel_covered, newly_banned, ptr, ptr + 1
            )
            sel_ub = sel_locked + sel_potential
            sel_chain = (chain, v)
            if sel_locked > best_value + 1e-12:
                best_value = sel_locked
                best_vars = _materialize(sel_chain)
            if sel_ub > best_value + 1e-12:
                counter += 1
                heapq.heappush(heap, (-sel_ub, counter, ptr + 1, sel_chain,
                                      sel_banned, sel_covered, sel_locked, sel_potential))

            # Rejection branch.
            rej_banned = banned | v_bit
            rej_potential = potential - availability_drop(
                banned, rej_banned, covered_mask, v_bit, ptr, ptr + 1
            )
            rej_ub = locked + rej_potential
            if rej_ub > best_value + 1e-12:
                counter += 1
                heapq.heappush(heap, (-rej_ub, counter, ptr + 1, chain,
                                      rej_banned, covered_mask, locked, rej_potential))
        optimal = not timed_out

    chosen = [collects[v] for v in sorted(best_vars)]
    plan = plan_from_collects("milp", chosen, rewards,
                              runtime_s=time.perf_counter() - t_begin, optimal=optimal)
    return plan


def _materialize(chain) -> list[int]:
    out = []
    while chain is not None:
        chain, v = chain
        out.append(v)
    out.reverse()
    return out
