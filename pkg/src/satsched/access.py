"""Imaging opportunity windows, collect discretization and action generation.

An image target is visible when the line of sight from the spacecraft to
the target center clears the Earth (modeled as a sphere of the equatorial
radius, conservative) and the angle off nadir does not exceed the target's
maximum look angle.  Maximal visibility intervals ("opportunities") are
located by scanning the trajectory at its node step and refining each
boundary by bisection on the interpolated trajectory; each opportunity is
then chopped into fixed-duration, back-to-back "collects", the atomic
schedulable actions.

Feasible actions from a planner state are the strictly-future collects
inside the planning lookahead that satisfy every constraint predicate,
the built-in one being the slew-rate limit between the pointing vector at
the end of one collect and the start of the next.
"""

from __future__ import annotations

import csv
import json
import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np

from .astro import Epoch, GeodeticPoint, StateVector, geodetic_to_ecef
from .constants import OMEGA_EARTH, R_EARTH_EQ, THETA_J2000
from .dynamics import Trajectory

# The "do nothing / wait" action understood by every planner.
NIL = None

DEFAULT_LOOK_ANGLE_MAX_DEG = 55.0
DEFAULT_COLLECT_DURATION_S = 10.0


@dataclass(frozen=True)
class ImageTarget:
    """A requested ground image with its reward and viewing constraints."""

    id: int
    center: GeodeticPoint
    reward: float = 1.0
    look_angle_max: float = math.radians(DEFAULT_LOOK_ANGLE_MAX_DEG)
    collect_duration: float = DEFAULT_COLLECT_DURATION_S

    def __post_init__(self):
        if self.reward < 0.0:
            raise ValueError("target reward must be non-negative")
        if not 0.0 < self.look_angle_max < math.pi / 2:
            raise ValueError("maximum look angle must lie in (0, pi/2)")
        if self.collect_duration <= 0.0:
            raise ValueError("collect duration must be positive")


@dataclass(frozen=True)
class Opportunity:
    """A maximal interval of target visibility on one trajectory."""

    image_id: int
    t_start: Epoch
    t_end: Epoch

    def __post_init__(self):
        if not self.t_start < self.t_end:
            raise ValueError("opportunity must have positive duration")

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def midpoint_seconds(self) -> float:
        return 0.5 * (self.t_start.seconds + self.t_end.seconds)


@dataclass(frozen=True)
class Collect:
    """A fixed-duration imaging slot inside an opportunity window."""

    id: int
    image_id: int
    t_start: Epoch
    t_end: Epoch
    pointing_start: np.ndarray  # unit vector, inertial frame
    pointing_end: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pointing_start", np.asarray(self.pointing_start, dtype=float))
        object.__setattr__(self, "pointing_end", np.asarray(self.pointing_end, dtype=float))


ConstraintPredicate = Callable[[object, Collect], bool]


@dataclass(frozen=True)
class ConstraintSet:
    """Slew limit, planning lookahead and extra action constraints."""

    max_slew_rate: float = math.radians(1.0)  # rad/s
    lookahead: float = 600.0  # s
    predicates: tuple[ConstraintPredicate, ...] = field(default=())

    def __post_init__(self):
        if self.max_slew_rate <= 0.0:
            raise ValueError("max slew rate must be positive")
        if self.lookahead <= 0.0:
            raise ValueError("planning lookahead must be positive")


def _visibility_components(positions: np.ndarray, epochs_sec: np.ndarray,
                           target_ecef: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Line-of-sight clearance mask and cosine of the look angle.

    ``positions`` (K, 3) are inertial; the Earth-fixed target is rotated to
    inertial at each epoch.
    """
    theta = THETA_J2000 + OMEGA_EARTH * epochs_sec
    c, s = np.cos(theta), np.sin(theta)
    gx, gy, gz = target_ecef
    tgt = np.empty_like(positions)
    tgt[..., 0] = c * gx - s * gy
    tgt[..., 1] = s * gx + c * gy
    tgt[..., 2] = gz

    los = tgt - positions
    los_norm = np.linalg.norm(los, axis=-1)
    pos_norm = np.linalg.norm(positions, axis=-1)
    u = los / los_norm[..., None]

    # Closest approach of the sight line to the geocenter, between endpoints.
    along = -np.sum(positions * u, axis=-1)
    closest_sq = pos_norm * pos_norm - along * along
    occluded = (along > 0.0) & (along < los_norm) & (closest_sq < R_EARTH_EQ * R_EARTH_EQ)

    cos_look = -np.sum(positions * u, axis=-1) / pos_norm
    return ~occluded, cos_look


def visibility(state: StateVector, target: ImageTarget) -> bool:
    """Whether ``target`` is imageable from ``state`` (LOS clear, look angle ok)."""
    clear, cos_look = _visibility_components(
        state.position[None, :],
        np.array([state.epoch.seconds]),
        geodetic_to_ecef(target.center),
    )
    return bool(clear[0] and cos_look[0] >= math.cos(target.look_angle_max))


def find_opportunities(traj: Trajectory, targets: Iterable[ImageTarget],
                       refine_tol: float = 0.01,
                       min_duration: float = 1.0) -> dict[int, list[Opportunity]]:
    """Locate every visibility window of every target on ``traj``.

    Boundaries are refined by bisection to ``refine_tol`` seconds and are
    reported at the innermost point known visible, so visibility holds at
    both window edges.  Windows shorter than ``min_duration`` are dropped.
    """
    targets = list(targets)
    positions = traj.positions()
    epochs_sec = traj.epoch_seconds()
    offsets = traj.offsets
    t0_sec = traj.t0.seconds

    masks = {}
    target_ecef = {}
    for tgt in targets:
        ecef = geodetic_to_ecef(tgt.center)
        target_ecef[tgt.id] = ecef
        clear, cos_look = _visibility_components(positions, epochs_sec, ecef)
        masks[tgt.id] = clear & (cos_look >= math.cos(tgt.look_angle_max))

    # Gather run boundaries across all targets to refine in one vectorized pass.
    runs: dict[int, list[list[float]]] = {tgt.id: [] for tgt in targets}
    refine_true: list[float] = []
    refine_false: list[float] = []
    refine_meta: list[tuple[int, int, int]] = []  # (target_id, run_idx, side) side 0=start 1=end

    for tgt in targets:
        mask = masks[tgt.id]
        if not mask.any():
            continue
        padded = np.concatenate([[False], mask, [False]])
        edges = np.diff(padded.astype(np.int8))
        start_idx = np.nonzero(edges == 1)[0]
        end_idx = np.nonzero(edges == -1)[0] - 1
        for run_idx, (i0, i1) in enumerate(zip(start_idx, end_idx)):
            start_off = float(offsets[i0])
            end_off = float(offsets[i1])
            runs[tgt.id].append([start_off, end_off])
            if i0 > 0:
                refine_true.append(start_off)
                refine_false.append(float(offsets[i0 - 1]))
                refine_meta.append((tgt.id, run_idx, 0))
            if i1 < len(offsets) - 1:
                refine_true.append(end_off)
                refine_false.append(float(offsets[i1 + 1]))
                refine_meta.append((tgt.id, run_idx, 1))

    if refine_meta:
        cos_max_by_id = {t.id: math.cos(t.look_angle_max) for t in targets}
        t_true = np.array(refine_true)
        t_false = np.array(refine_false)
        ecef_rows = np.array([target_ecef[m[0]] for m in refine_meta])
        cos_max = np.array([cos_max_by_id[m[0]] for m in refine_meta])
        n_iter = max(1, math.ceil(math.log2(max(float(np.max(np.abs(t_false - t_true))), refine_tol) / refine_tol)))
        for _ in range(n_iter):
            mid = 0.5 * (t_true + t_false)
            pos, _ = traj.interpolate_many(mid)
            clear, cos_look = _visibility_components_rows(pos, t0_sec + mid, ecef_rows)
            vis = clear & (cos_look >= cos_max)
            t_true = np.where(vis, mid, t_true)
            t_false = np.where(vis, t_false, mid)
        for (tgt_id, run_idx, side), value in zip(refine_meta, t_true):
            runs[tgt_id][run_idx][side] = float(value)

    result: dict[int, list[Opportunity]] = {}
    for tgt in targets:
        windows = []
        for start_off, end_off in runs[tgt.id]:
            if end_off - start_off >= min_duration:
                windows.append(
                    Opportunity(tgt.id, traj.t0 + start_off, traj.t0 + end_off)
                )
        result[tgt.id] = windows
    return result


def _visibility_components_rows(positions: np.ndarray, epochs_sec: np.ndarray,
                                target_ecef_rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row variant: row i of positions is tested against target row i."""
    theta = THETA_J2000 + OMEGA_EARTH * epochs_sec
    c, s = np.cos(theta), np.sin(theta)
    tgt = np.empty_like(positions)
    tgt[:, 0] = c * target_ecef_rows[:, 0] - s * target_ecef_rows[:, 1]
    tgt[:, 1] = s * target_ecef_rows[:, 0] + c * target_ecef_rows[:, 1]
    tgt[:, 2] = target_ecef_rows[:, 2]

    los = tgt - positions
    los_norm = np.linalg.norm(los, axis=-1)
    pos_norm = np.linalg.norm(positions, axis=-1)
    u = los / los_norm[:, None]
    along = -np.sum(positions * u, axis=-1)
    closest_sq = pos_norm * pos_norm - along * along
    occluded = (along > 0.0) & (along < los_norm) & (closest_sq < R_EARTH_EQ * R_EARTH_EQ)
    cos_look = -np.sum(positions * u, axis=-1) / pos_norm
    return ~occluded, cos_look


def discretize(opportunities: dict[int, list[Opportunity]],
               targets: Iterable[ImageTarget],
               traj: Trajectory) -> list[Collect]:
    """Chop opportunity windows into back-to-back fixed-duration collects.

    Collects start at the window start; a trailing remainder shorter than
    the collect duration is discarded.  Pointing unit vectors at the
    start/end of each collect come from the generating trajectory.
    Collects are returned sorted by start time with sequential ids.
    """
    target_by_id = {t.id: t for t in targets}
    t0_sec = traj.t0.seconds

    raw: list[tuple[float, int, float, float]] = []  # (start_off, image_id, end_off, duration)
    for image_id, windows in opportunities.items():
        duration = target_by_id[image_id].collect_duration
        for window in windows:
            start_off = window.t_start.seconds - t0_sec
            count = int(math.floor(window.duration / duration + 1e-9))
            for j in range(count):
                s = start_off + j * duration
                raw.append((s, image_id, s + duration, duration))
    raw.sort(key=lambda item: (item[0], item[1]))

    if not raw:
        return []

    # Pointing vectors for all collect endpoints in one interpolation pass.
    times = np.empty(2 * len(raw))
    ecef_rows = np.empty((2 * len(raw), 3))
    for k, (s, image_id, e, _) in enumerate(raw):
        times[2 * k] = s
        times[2 * k + 1] = e
        ecef_rows[2 * k] = ecef_rows[2 * k + 1] = geodetic_to_ecef(target_by_id[image_id].center)
    pos, _ = traj.interpolate_many(times)
    theta = THETA_J2000 + OMEGA_EARTH * (t0_sec + times)
    c, s_ = np.cos(theta), np.sin(theta)
    tgt = np.empty_like(pos)
    tgt[:, 0] = c * ecef_rows[:, 0] - s_ * ecef_rows[:, 1]
    tgt[:, 1] = s_ * ecef_rows[:, 0] + c * ecef_rows[:, 1]
    tgt[:, 2] = ecef_rows[:, 2]
    los = tgt - pos
    los /= np.linalg.norm(los, axis=-1, keepdims=True)

    collects = []
    for k, (s, image_id, e, _) in enumerate(raw):
        collects.append(
            Collect(
                id=k,
                image_id=image_id,
                t_start=traj.t0 + s,
                t_end=traj.t0 + e,
                pointing_start=los[2 * k],
                pointing_end=los[2 * k + 1],
            )
        )
    return collects


# Angular slack absorbing round-off in unit-vector dot products.
SLEW_ANGLE_TOL = 1e-9


def slew_angle(p_from: np.ndarray, p_to: np.ndarray) -> float:
    """Angle [rad] between two pointing unit vectors."""
    return float(np.arccos(np.clip(np.dot(p_from, p_to), -1.0, 1.0)))


def slew_feasible(c_from: Collect, c_to: Collect, max_slew_rate: float) -> bool:
    """Whether the spacecraft can re-point from one collect to the next in time."""
    gap = c_to.t_start - c_from.t_end
    if gap < 0.0:
        return False
    return slew_angle(c_from.pointing_end, c_to.pointing_start) <= max_slew_rate * gap + SLEW_ANGLE_TOL


class ActionSpaceIndex:
    """Precomputed arrays for fast repeated action-space queries."""

    def __init__(self, collects: list[Collect], cs: ConstraintSet):
        self.collects = collects
        self.cs = cs
        self.start_seconds = [c.t_start.seconds for c in collects]
        if any(b < a for a, b in zip(self.start_seconds, self.start_seconds[1:])):
            raise ValueError("collects must be sorted by start time")
        self.by_id = {c.id: c for c in collects}

    def actions(self, state) -> list[Optional[Collect]]:
        """NIL plus every feasible collect for ``state`` (Alg.-style generation)."""
        now = state.time.seconds
        lo = bisect_right(self.start_seconds, now)
        hi = bisect_right(self.start_seconds, now + self.cs.lookahead)
        last = self.by_id.get(state.last_collect_id) if state.last_collect_id is not None else None

        out: list[Optional[Collect]] = [NIL]
        for c in self.collects[lo:hi]:
            if last is not None and not slew_feasible(last, c, self.cs.max_slew_rate):
                continue
            if any(not pred(state, c) for pred in self.cs.predicates):
                continue
            out.append(c)
        return out

    def next_start_after(self, t_seconds: float) -> Optional[float]:
        """Start time of the first collect strictly after ``t_seconds``."""
        i = bisect_right(self.start_seconds, t_seconds)
        return self.start_seconds[i] if i < len(self.start_seconds) else None


def action_space(state, collects: list[Collect], cs: ConstraintSet) -> list[Optional[Collect]]:
    """Feasible actions for ``state``: NIL plus constrained future collects."""
    return ActionSpaceIndex(collects, cs).actions(state)


# ---------------------------------------------------------------------------
# File formats


def load_targets(path) -> list[ImageTarget]:
    """Read targets from a JSON array of objects."""
    with open(path) as fh:
        records = json.load(fh)
    targets = []
    for rec in records:
        targets.append(
            ImageTarget(
                id=int(rec["id"]),
                center=GeodeticPoint(
                    math.radians(rec["lat_deg"]),
                    math.radians(rec["lon_deg"]),
                    float(rec.get("alt_m", 0.0)),
                ),
                reward=float(rec.get("reward", 1.0)),
                look_angle_max=math.radians(rec.get("theta_max_deg", DEFAULT_LOOK_ANGLE_MAX_DEG)),
                collect_duration=float(rec.get("collect_duration_s", DEFAULT_COLLECT_DURATION_S)),
            )
        )
    return targets


def save_targets(targets: Iterable[ImageTarget], path) -> None:
    records = [
        {
            "id": t.id,
            "lat_deg": math.degrees(t.center.latitude),
            "lon_deg": math.degrees(t.center.longitude),
            "alt_m": t.center.altitude,
            "reward": t.reward,
            "theta_max_deg": math.degrees(t.look_angle_max),
            "collect_duration_s": t.collect_duration,
        }
        for t in targets
    ]
    with open(path, "w") as fh:
        json.dump(records, fh, indent=2, sort_keys=True)
        fh.write("\n")


def opportunities_to_csv(opportunities: dict[int, list[Opportunity]], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "t_start", "t_end", "duration_s"])
        for image_id in sorted(opportunities):
            for w in opportunities[image_id]:
                writer.writerow([image_id, w.t_start.isoformat(), w.t_end.isoformat(),
                                 repr(w.duration)])


def collects_to_csv(collects: Iterable[Collect], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([
            "id", "image_id", "t_start", "t_end",
            "px_start", "py_start", "pz_start", "px_end", "py_end", "pz_end",
        ])
        for c in collects:
            writer.writerow(
                [c.id, c.image_id, c.t_start.isoformat(), c.t_end.isoformat()]
                + [repr(float(x)) for x in c.pointing_start]
                + [repr(float(x)) for x in c.pointing_end]
            )


def collects_from_csv(path) -> list[Collect]:
    collects = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            collects.append(
                Collect(
                    id=int(rec["id"]),
                    image_id=int(rec["image_id"]),
                    t_start=Epoch.from_isoformat(rec["t_start"]),
                    t_end=Epoch.from_isoformat(rec["t_end"]),
                    pointing_start=np.array(
                        [float(rec["px_start"]), float(rec["py_start"]), float(rec["pz_start"])]
                    ),
                    pointing_end=np.array(
                        [float(rec["px_end"]), float(rec["py_end"]), float(rec["pz_end"])]
                    ),
                )
            )
    collects.sort(key=lambda c: (c.t_start.seconds, c.id))
    return collects
