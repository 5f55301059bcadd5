"""Shared planner state, plan containers and the independent plan checker."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from ..access import Collect, ConstraintSet, slew_feasible
from ..astro import Epoch


@dataclass(frozen=True)
class MdpState:
    """Planner state: current time, per-image collected flags, last pointing.

    The collected flags are stored as a bitmask over image *indices*
    (0..n_images-1, assigned by the planner); ``last_collect_id`` identifies
    the collect whose end pointing vector constrains the next slew.
    """

    time: Epoch
    collected_mask: int
    n_images: int
    last_collect_id: Optional[int] = None

    def has_collected(self, image_index: int) -> bool:
        return bool((self.collected_mask >> image_index) & 1)

    def with_collect(self, image_index: int, time: Epoch, collect_id: int) -> "MdpState":
        return MdpState(time, self.collected_mask | (1 << image_index),
                        self.n_images, collect_id)

    def advanced_to(self, time: Epoch) -> "MdpState":
        return MdpState(time, self.collected_mask, self.n_images, self.last_collect_id)

    @property
    def collected(self) -> tuple[bool, ...]:
        return tuple(bool((self.collected_mask >> i) & 1) for i in range(self.n_images))


def reward(state: MdpState, rewards: Sequence[float]) -> float:
    """Signed state reward: +r for each collected image, -r for each missing."""
    if len(rewards) != state.n_images:
        raise ValueError("reward vector length must equal the number of images")
    total = 0.0
    for i, r in enumerate(rewards):
        total += r if state.has_collected(i) else -r
    return total


@dataclass(frozen=True)
class PlanEntry:
    collect_id: int
    image_id: int
    t_start: Epoch
    t_end: Epoch


@dataclass(frozen=True)
class TaskPlan:
    """An ordered schedule of chosen collects plus planning metadata.

    ``nominal_reward`` is the deterministic plan value: the sum of rewards
    of the planned images, assuming the predicted trajectory is exact.
    ``runtime_s`` is wall-clock planning time and is deliberately excluded
    from the on-disk artifact so reruns are byte-identical.
    """

    planner: str
    entries: tuple[PlanEntry, ...]
    nominal_reward: float
    runtime_s: float = 0.0
    optimal: Optional[bool] = None

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))

    @property
    def image_ids(self) -> tuple[int, ...]:
        return tuple(e.image_id for e in self.entries)

    def to_json_dict(self) -> dict:
        doc = {
            "planner": self.planner,
            "nominal_reward": self.nominal_reward,
            "entries": [
                {
                    "collect_id": e.collect_id,
                    "image_id": e.image_id,
                    "t_start": e.t_start.isoformat(),
                    "t_end": e.t_end.isoformat(),
                }
                for e in self.entries
            ],
        }
        if self.optimal is not None:
            doc["optimal"] = self.optimal
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict, runtime_s: float = 0.0) -> "TaskPlan":
        entries = tuple(
            PlanEntry(
                collect_id=int(e["collect_id"]),
                image_id=int(e["image_id"]),
                t_start=Epoch.from_isoformat(e["t_start"]),
                t_end=Epoch.from_isoformat(e["t_end"]),
            )
            for e in doc["entries"]
        )
        return cls(
            planner=doc["planner"],
            entries=entries,
            nominal_reward=float(doc["nominal_reward"]),
            runtime_s=runtime_s,
            optimal=doc.get("optimal"),
        )


class PlanValidationError(ValueError):
    pass


def validate_plan(plan: TaskPlan, collects_by_id: dict[int, Collect],
                  cs: ConstraintSet) -> None:
    """Check plan invariants: time order, slew feasibility, unique images.

    This checker is independent of the planners and is applied to every
    plan they emit.
    """
    seen_images = set()
    prev: Optional[Collect] = None
    for entry in plan.entries:
        collect = collects_by_id.get(entry.collect_id)
        if collect is None:
            raise PlanValidationError(f"unknown collect id {entry.collect_id}")
        if collect.image_id != entry.image_id:
            raise PlanValidationError(
                f"collect {entry.collect_id} image mismatch "
                f"({collect.image_id} != {entry.image_id})"
            )
        if entry.image_id in seen_images:
            raise PlanValidationError(f"image {entry.image_id} planned twice")
        seen_images.add(entry.image_id)
        if prev is not None:
            if not collect.t_start.seconds > prev.t_start.seconds:
                raise PlanValidationError("plan entries not strictly increasing in time")
            if not slew_feasible(prev, collect, cs.max_slew_rate):
                raise PlanValidationError(
                    f"slew from collect {prev.id} to {collect.id} infeasible"
                )
        prev = collect


def plan_from_collects(planner: str, chosen: Iterable[Collect],
                       rewards_by_image: dict[int, float], runtime_s: float,
                       optimal: Optional[bool] = None) -> TaskPlan:
    chosen = sorted(chosen, key=lambda c: (c.t_start.seconds, c.id))
    entries = tuple(
        PlanEntry(c.id, c.image_id, c.t_start, c.t_end) for c in chosen
    )
    nominal = float(sum(rewards_by_image[c.image_id] for c in chosen))
    return TaskPlan(planner=planner, entries=entries, nominal_reward=nominal,
                    runtime_s=runtime_s, optimal=optimal)
