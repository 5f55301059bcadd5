"""Fixed-step RK4 trajectory propagation and cubic-Hermite interpolation.

Trajectories store position and velocity at a uniform step (plus one
trailing node when the duration is not a step multiple), and interpolate
between nodes with a per-component cubic Hermite polynomial, so the
interpolant is C1 and exact at the nodes without extra dynamics
evaluations.

An ensemble of initial states can be integrated in lockstep through the
batched entry point, which is how Monte Carlo sampling stays fast.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..astro import Epoch, StateVector
from ..constants import R_EARTH_EQ, R_EARTH_POLAR
from .forces import ForceModelConfig, ReentryError, SpacecraftParams, _acceleration_batch
from .gravity import GravityField, bundled_field

REENTRY_FLOOR_M = 100e3


@dataclass(frozen=True)
class Trajectory:
    """Propagated states at fixed step with a cubic-Hermite accessor."""

    t0: Epoch
    step: float
    offsets: np.ndarray  # (K,) seconds past t0, uniform except a possible last node
    states: np.ndarray  # (K, 6) position then velocity

    def __post_init__(self):
        offsets = np.asarray(self.offsets, dtype=float)
        states = np.asarray(self.states, dtype=float)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "states", states)
        if np.any(np.diff(offsets) <= 0):
            raise ValueError("trajectory epochs must be strictly increasing")

    def __len__(self) -> int:
        return len(self.offsets)

    @property
    def duration(self) -> float:
        return float(self.offsets[-1])

    def epoch_at(self, index: int) -> Epoch:
        return self.t0 + float(self.offsets[index])

    def state_at(self, index: int) -> StateVector:
        row = self.states[index]
        return StateVector(self.epoch_at(index), row[:3].copy(), row[3:].copy())

    def positions(self) -> np.ndarray:
        return self.states[:, :3]

    def velocities(self) -> np.ndarray:
        return self.states[:, 3:]

    def epoch_seconds(self) -> np.ndarray:
        return self.t0.seconds + self.offsets

    def interpolate(self, epoch: Epoch) -> StateVector:
        r, v = self.interpolate_many(np.array([epoch.seconds - self.t0.seconds]))
        return StateVector(epoch, r[0], v[0])

    def interpolate_many(self, offsets: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Interpolate positions/velocities at offsets [s] past t0, shape (M,)."""
        t = np.asarray(offsets, dtype=float)
        if np.any(t < self.offsets[0] - 1e-9) or np.any(t > self.offsets[-1] + 1e-9):
            raise ValueError("interpolation epoch outside the trajectory span")
        t = np.clip(t, self.offsets[0], self.offsets[-1])
        seg = np.clip(np.searchsorted(self.offsets, t, side="right") - 1, 0, len(self.offsets) - 2)
        t_lo = self.offsets[seg]
        h = self.offsets[seg + 1] - t_lo
        u = ((t - t_lo) / h)[:, None]

        r0 = self.states[seg, :3]
        v0 = self.states[seg, 3:]
        r1 = self.states[seg + 1, :3]
        v1 = self.states[seg + 1, 3:]
        h = h[:, None]

        u2 = u * u
        u3 = u2 * u
        pos = (
            (2.0 * u3 - 3.0 * u2 + 1.0) * r0
            + (u3 - 2.0 * u2 + u) * h * v0
            + (-2.0 * u3 + 3.0 * u2) * r1
            + (u3 - u2) * h * v1
        )
        vel = (
            (6.0 * u2 - 6.0 * u) / h * r0
            + (3.0 * u2 - 4.0 * u + 1.0) * v0
            + (-6.0 * u2 + 6.0 * u) / h * r1
            + (3.0 * u2 - 2.0 * u) * v1
        )
        return pos, vel


def _node_offsets(duration: float, step: float) -> np.ndarray:
    n_full = int(np.floor(duration / step + 1e-9))
    offsets = np.arange(n_full + 1, dtype=float) * step
    if duration - offsets[-1] > 1e-9:
        offsets = np.append(offsets, duration)
    return offsets


def propagate_rk4(initial: StateVector, sc: SpacecraftParams, cfg: ForceModelConfig,
                  duration: float, step: float = 10.0,
                  gravity_field: GravityField | None = None) -> Trajectory:
    """Propagate one state for ``duration`` seconds at fixed ``step``.

    A final partial step is taken when the duration is not a multiple of
    the step.  Raises ReentryError if the state falls below 100 km.
    """
    offsets, states = propagate_rk4_batch(
        initial.epoch,
        initial.position[None, :],
        initial.velocity[None, :],
        sc, cfg, duration, step, gravity_field,
    )
    return Trajectory(initial.epoch, step, offsets, states[0])


def propagate_rk4_batch(epoch0: Epoch, r0: np.ndarray, v0: np.ndarray,
                        sc: SpacecraftParams, cfg: ForceModelConfig,
                        duration: float, step: float = 10.0,
                        gravity_field: GravityField | None = None):
    """Lockstep RK4 for a batch of initial states of shape (N, 3).

    Returns (offsets (K,), states (N, K, 6)).
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    if duration < 0.0:
        raise ValueError("duration must be non-negative")
    field = gravity_field or bundled_field()
    offsets = _node_offsets(duration, step)

    n = r0.shape[0]
    states = np.empty((n, len(offsets), 6))
    y = np.hstack([np.asarray(r0, dtype=float), np.asarray(v0, dtype=float)])
    _check_floor(y[:, :3], epoch0)
    states[:, 0, :] = y

    for k in range(1, len(offsets)):
        h = offsets[k] - offsets[k - 1]
        t = epoch0 + float(offsets[k - 1])
        y = _rk4_step(t, y, h, sc, cfg, field)
        _check_floor(y[:, :3], epoch0 + float(offsets[k]))
        states[:, k, :] = y
    return offsets, states


def _rk4_step(t: Epoch, y: np.ndarray, h: float, sc, cfg, field) -> np.ndarray:
    def rhs(t_stage: Epoch, y_stage: np.ndarray) -> np.ndarray:
        a = _acceleration_batch(t_stage, y_stage[:, :3], y_stage[:, 3:], sc, cfg, field)
        return np.hstack([y_stage[:, 3:], a])

    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = rhs(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_floor(r: np.ndarray, epoch: Epoch) -> None:
    radius = np.linalg.norm(r, axis=-1)
    if np.any(radius < R_EARTH_POLAR + REENTRY_FLOOR_M):
        idx = np.nonzero(radius < R_EARTH_POLAR + REENTRY_FLOOR_M)[0]
        raise ReentryError(
            f"radius {float(np.min(radius)) / 1e3:.1f} km below the re-entry floor "
            f"at {epoch.isoformat()}",
            sample_indices=idx.tolist(),
        )
    if not np.all(np.isfinite(r)):
        raise ReentryError("non-finite position encountered during propagation")


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write epoch ISO-8601 plus inertial position/velocity rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "rx", "ry", "rz", "vx", "vy", "vz"])
        for i in range(len(traj)):
            epoch = traj.epoch_at(i)
            row = traj.states[i]
            writer.writerow([epoch.isoformat()] + [repr(float(x)) for x in row])


def trajectory_from_csv(path) -> Trajectory:
    epochs = []
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[0] != "epoch":
            raise ValueError("unrecognized trajectory CSV header")
        for rec in reader:
            epochs.append(Epoch.from_isoformat(rec[0]))
            rows.append([float(x) for x in rec[1:7]])
    if len(rows) < 1:
        raise ValueError("empty trajectory CSV")
    t0 = epochs[0]
    offsets = np.array([e.seconds - t0.seconds for e in epochs])
    step = float(offsets[1] - offsets[0]) if len(offsets) > 1 else 1.0
    return Trajectory(t0, step, offsets, np.asarray(rows))
