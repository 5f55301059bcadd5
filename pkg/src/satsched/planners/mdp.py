"""Depth-limited forward search over the collect-scheduling decision process.

The planner state is the current time, one collected-flag per image and the
last flown collect (whose end pointing constrains the next slew).  Taking a
collect succeeds with the precomputed feasibility probability of that
collect and fails otherwise; time advances to the collect end either way.
The wait action (NIL) advances time just far enough that the first collect
beyond the current lookahead window becomes reachable, which guarantees
progress and keeps every collect reachable.

Action values are expected gains in the signed state reward accumulated
over the search depth (a successful collect of a new image flips its flag
and gains twice that image's reward).  The value returned for a state also
carries the state's own signed reward as an additive offset, which is
action-independent and so never changes the argmax.  Ties break toward the
earliest collect, with waiting last.  The plan is built by repeatedly
searching from the current state, committing the best action, and
transitioning as if the collect succeeded.
"""

from __future__ import annotations

import math
import time
from typing import Optional

import numpy as np

from ..access import NIL, SLEW_ANGLE_TOL, ActionSpaceIndex, Collect, ConstraintSet
from ..astro import Epoch
from ..uncertainty import CollectProbabilityTable
from .types import MdpState, TaskPlan, plan_from_collects, reward

MAX_SEARCH_DEPTH = 4


class ForwardSearch:
    """Reusable search context over a fixed collect set and probability table."""

    def __init__(self, collects: list[Collect], rewards: dict[int, float],
                 cs: ConstraintSet, probs: CollectProbabilityTable,
                 discount: float = 1.0):
        missing = [c.id for c in collects if c.id not in probs.probabilities]
        if missing:
            raise KeyError(
                f"no feasibility probability for collect ids {missing[:5]}"
                + ("..." if len(missing) > 5 else "")
            )
        self.collects = collects
        self.rewards = rewards
        self.cs = cs
        # Accepted for interface completeness; the depth-limited search
        # applies no per-step discounting.
        self.discount = discount

        self.image_index: dict[int, int] = {}
        for c in collects:
            self.image_index.setdefault(c.image_id, len(self.image_index))
        self.n_images = len(self.image_index)
        self.reward_vector = [0.0] * self.n_images
        for c in collects:
            self.reward_vector[self.image_index[c.image_id]] = float(rewards[c.image_id])

        self.index = ActionSpaceIndex(collects, cs)
        n = len(collects)
        self._starts = np.array([c.t_start.seconds for c in collects])
        self._ends = np.array([c.t_end.seconds for c in collects])
        self._p_start = np.array([c.pointing_start for c in collects]) if n else np.zeros((0, 3))
        self._p_end = np.array([c.pointing_end for c in collects]) if n else np.zeros((0, 3))
        self._img = np.array([self.image_index[c.image_id] for c in collects], dtype=np.int64)
        self._p = np.array([probs.probabilities[c.id] for c in collects])
        # Expected one-step gain of each collect: p * 2r of its image.
        self._leaf_gain = np.array(
            [probs.probabilities[c.id] * 2.0 * self.reward_vector[self.image_index[c.image_id]]
             for c in collects]
        )
        self._row_of_id = {c.id: i for i, c in enumerate(collects)}
        self.probs = probs.probabilities
        # Per-query cache: success/failure branches of one expansion share
        # the same (time, last collect) and therefore the same candidates.
        self._cand_cache: dict = {}

    def initial_state(self, t_start: Epoch) -> MdpState:
        return MdpState(time=t_start, collected_mask=0, n_images=self.n_images,
                        last_collect_id=None)

    def actions(self, state: MdpState) -> list[Optional[Collect]]:
        return self.index.actions(state)

    # -- internal search over (time, last collect index, collected flags) --

    def _candidate_indices(self, t: float, last_idx: Optional[int]) -> np.ndarray:
        """Collect indices reachable from time ``t`` after ``last_idx``."""
        key = (t, last_idx)
        cached = self._cand_cache.get(key)
        if cached is not None:
            return cached
        lo = int(np.searchsorted(self._starts, t, side="right"))
        hi = int(np.searchsorted(self._starts, t + self.cs.lookahead, side="right"))
        idx = np.arange(lo, hi)
        if last_idx is not None and len(idx):
            gap = self._starts[idx] - self._ends[last_idx]
            needed = np.cos(np.minimum(self.cs.max_slew_rate * np.maximum(gap, 0.0)
                                       + SLEW_ANGLE_TOL, math.pi))
            cos_angle = self._p_start[idx] @ self._p_end[last_idx]
            idx = idx[(gap >= 0.0) & (cos_angle >= needed)]
        if len(self._cand_cache) > 4096:
            self._cand_cache.clear()
        self._cand_cache[key] = idx
        return idx

    def _apply_user_predicates(self, idx: np.ndarray, t: float, mask_int: int,
                               last_idx: Optional[int]) -> np.ndarray:
        if not self.cs.predicates or not len(idx):
            return idx
        last_id = self.collects[last_idx].id if last_idx is not None else None
        state = MdpState(Epoch(t), mask_int, self.n_images, last_id)
        keep = [i for i in idx if all(p(state, self.collects[i]) for p in self.cs.predicates)]
        return np.array(keep, dtype=np.int64)

    def _wait_time(self, t: float) -> Optional[float]:
        """Advance past the lookahead so the next distant collect enters it."""
        next_start = self.index.next_start_after(t + self.cs.lookahead)
        if next_start is None:
            return None
        return next_start - self.cs.lookahead

    def _best_gain(self, t: float, last_idx: Optional[int], collected: np.ndarray,
                   mask_int: int, depth: int) -> float:
        """Best expected signed-reward gain achievable within ``depth`` steps."""
        if depth == 0:
            return 0.0
        idx = self._candidate_indices(t, last_idx)
        if len(idx):
            idx = idx[~collected[self._img[idx]]]
        idx = self._apply_user_predicates(idx, t, mask_int, last_idx)

        if depth == 1:
            # Leaf level: expected one-step gain; waiting gains nothing.
            return float(np.max(self._leaf_gain[idx], initial=0.0))

        t_wait = self._wait_time(t)
        best = self._best_gain(t_wait, last_idx, collected, mask_int, depth - 1) \
            if t_wait is not None else 0.0
        for i in idx:
            p = self._p[i]
            end = float(self._ends[i])
            img = int(self._img[i])
            succ = collected.copy()
            succ[img] = True
            value = p * (2.0 * self.reward_vector[img]
                         + self._best_gain(end, int(i), succ, mask_int | (1 << img),
                                           depth - 1))
            if p < 1.0:
                value += (1.0 - p) * self._best_gain(end, int(i), collected, mask_int,
                                                     depth - 1)
            if value > best:
                best = value
        return best

    def select_action(self, state: MdpState, depth: int) -> tuple[Optional[Collect], float]:
        """Best action and its value (state reward plus best expected gain)."""
        if depth == 0:
            return NIL, 0.0
        base = reward(state, self.reward_vector)
        collected = np.array([(state.collected_mask >> i) & 1 for i in range(self.n_images)],
                             dtype=bool)
        last_idx = self._index_of_collect(state.last_collect_id)
        t = state.time.seconds

        idx = self._candidate_indices(t, last_idx)
        if len(idx):
            idx = idx[~collected[self._img[idx]]]
        idx = self._apply_user_predicates(idx, t, state.collected_mask, last_idx)

        best_action: Optional[Collect] = None
        best_value = -math.inf
        for i in idx:
            p = self._p[i]
            img = int(self._img[i])
            end = float(self._ends[i])
            succ = collected.copy()
            succ[img] = True
            value = p * (2.0 * self.reward_vector[img]
                         + self._best_gain(end, int(i), succ,
                                           state.collected_mask | (1 << img),
                                           depth - 1))
            if p < 1.0:
                value += (1.0 - p) * self._best_gain(end, int(i), collected,
                                                     state.collected_mask, depth - 1)
            if value > best_value:
                best_action, best_value = self.collects[i], value

        t_wait = self._wait_time(t)
        nil_value = self._best_gain(t_wait, last_idx, collected, state.collected_mask,
                                    depth - 1) if t_wait is not None else 0.0
        if nil_value > best_value:
            best_action, best_value = NIL, nil_value
        return best_action, base + best_value

    def _index_of_collect(self, collect_id: Optional[int]) -> Optional[int]:
        if collect_id is None:
            return None
        try:
            return self._row_of_id[collect_id]
        except KeyError:
            raise KeyError(f"collect id {collect_id} not in the planning set") from None


def select_action(state: MdpState, depth: int, probs: CollectProbabilityTable, *,
                  collects: list[Collect], rewards: dict[int, float],
                  cs: ConstraintSet, discount: float = 1.0) -> tuple[Optional[Collect], float]:
    """One-shot depth-limited search; see ForwardSearch for repeated queries."""
    return ForwardSearch(collects, rewards, cs, probs, discount).select_action(state, depth)


def plan_mdp_forward_search(collects: list[Collect], rewards: dict[int, float],
                            cs: ConstraintSet, probs: CollectProbabilityTable,
                            depth: int = 2, t_start: Optional[Epoch] = None,
                            t_end: Optional[Epoch] = None,
                            discount: float = 1.0) -> TaskPlan:
    """Build a schedule by committing the best depth-limited action repeatedly.

    Transitions assume each committed collect succeeds.  Planning stops when
    no future collect remains or the horizon end is passed.
    """
    if depth < 1:
        raise ValueError("search depth must be >= 1")
    if depth > MAX_SEARCH_DEPTH:
        raise ValueError(f"search depth capped at {MAX_SEARCH_DEPTH}")
    t_begin = time.perf_counter()
    if not collects:
        return TaskPlan(planner="mdp", entries=(), nominal_reward=0.0,
                        runtime_s=time.perf_counter() - t_begin)

    search = ForwardSearch(collects, rewards, cs, probs, discount)
    if t_start is None:
        t_start = Epoch(min(c.t_start.seconds for c in collects) - 1.0)
    if t_end is None:
        t_end = Epoch(max(c.t_end.seconds for c in collects) + 1.0)

    state = search.initial_state(t_start)
    chosen: list[Collect] = []
    while state.time < t_end:
        action, _ = search.select_action(state, depth)
        if action is NIL:
            if search.index.next_start_after(state.time.seconds) is None:
                break
            t_wait = search._wait_time(state.time.seconds)
            if t_wait is None:
                break
            state = state.advanced_to(Epoch(t_wait))
        else:
            chosen.append(action)
            state = state.with_collect(search.image_index[action.image_id],
                                       action.t_end, action.id)
    return plan_from_collects("mdp", chosen, rewards,
                              runtime_s=time.perf_counter() - t_begin)
