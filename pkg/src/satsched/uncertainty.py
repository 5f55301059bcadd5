"""Monte Carlo characterization of window shifts and collect feasibility.

Initial-state error is sampled as a zero-mean Gaussian position perturbation
(per-axis sigma = total RMS / sqrt(3), velocity exact), each sample is
propagated, and its visibility windows are matched to the nominal windows by
nearest midpoint.  From the matched ensemble come the per-hour start-time
deviation statistics and, for each candidate collect, the fraction of
samples in which the collect interval fits entirely inside a single window
of its image: the collect feasibility probability used by the
probability-aware planner.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .access import Collect, ImageTarget, Opportunity, find_opportunities
from .astro import StateVector
from .dynamics import ForceModelConfig, SpacecraftParams, Trajectory, propagate_rk4_batch


@dataclass(frozen=True)
class OrbitCovariance:
    """Initial position uncertainty: total RMS sigma [m], sample count, seed."""

    sigma_pos: float
    n_samples: int
    seed: int = 0

    def __post_init__(self):
        if self.sigma_pos < 0.0:
            raise ValueError("position sigma must be non-negative")
        if self.n_samples < 1:
            raise ValueError("sample count must be >= 1")


@dataclass(frozen=True)
class CollectProbabilityTable:
    """Per-collect feasibility probability plus sampling provenance."""

    probabilities: dict[int, float]
    sigma_pos: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if any(not 0.0 <= p <= 1.0 for p in self.probabilities.values()):
            raise ValueError("probabilities must lie in [0, 1]")

    def to_json_dict(self) -> dict:
        return {
            "sigma_pos_m": self.sigma_pos,
            "n_samples": self.n_samples,
            "seed": self.seed,
            "probabilities": {str(k): v for k, v in sorted(self.probabilities.items())},
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "CollectProbabilityTable":
        return cls(
            probabilities={int(k): float(v) for k, v in doc["probabilities"].items()},
            sigma_pos=float(doc["sigma_pos_m"]),
            n_samples=int(doc["n_samples"]),
            seed=int(doc["seed"]),
        )


@dataclass(frozen=True)
class WindowStatistics:
    """Per-hour-bucket start-time scatter against the global mean duration."""

    bucket_hours: tuple[int, ...]
    sigma_start_s: tuple[float, ...]
    mean_duration_s: float
    low_sample_buckets: tuple[int, ...] = ()

    @property
    def ratios(self) -> tuple[float, ...]:
        if self.mean_duration_s <= 0.0:
            return tuple(0.0 for _ in self.sigma_start_s)
        return tuple(s / self.mean_duration_s for s in self.sigma_start_s)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bucket_hr", "sigma_start_s", "mean_duration_s", "ratio"])
            for hour, sigma, ratio in zip(self.bucket_hours, self.sigma_start_s, self.ratios):
                writer.writerow([hour, repr(sigma), repr(self.mean_duration_s), repr(ratio)])


@dataclass
class EnsembleWindows:
    """Nominal windows, per-sample windows, and their matched start times."""

    covariance: OrbitCovariance
    nominal: dict[int, list[Opportunity]]
    sample_windows: list[dict[int, list[Opportunity]]]
    window_refs: list[tuple[int, int]]  # (image_id, window index) per matched row
    matched_starts: np.ndarray  # (n_windows, n_samples), NaN where unmatched
    matched_durations: np.ndarray
    unmatched_windows: int
    t0_seconds: float
    horizon_s: float

    @property
    def n_samples(self) -> int:
        return self.matched_starts.shape[1]


def sample_initial_states(nominal: StateVector, cov: OrbitCovariance) -> list[StateVector]:
    """Draw ``cov.n_samples`` perturbed copies of the nominal state.

    Position is perturbed by an isotropic Gaussian whose total RMS equals
    ``cov.sigma_pos``; velocity is left exact.  Deterministic given the seed.
    """
    rng = np.random.default_rng(cov.seed)
    per_axis = cov.sigma_pos / math.sqrt(3.0)
    offsets = rng.normal(scale=per_axis, size=(cov.n_samples, 3)) if per_axis > 0.0 \
        else np.zeros((cov.n_samples, 3))
    return [
        StateVector(nominal.epoch, nominal.position + offsets[i], nominal.velocity.copy())
        for i in range(cov.n_samples)
    ]


def ensemble_windows(nominal_traj: Trajectory, nominal_windows: dict[int, list[Opportunity]],
                     samples: list[StateVector], targets: list[ImageTarget],
                     sc: SpacecraftParams, cfg: ForceModelConfig,
                     duration: float, step: float = 10.0,
                     cov: OrbitCovariance | None = None,
                     threads: int = 1) -> EnsembleWindows:
    """Propagate every sample and match its windows to the nominal windows.

    Matching is nearest-midpoint per image with a cutoff of half the spacing
    between neighboring nominal windows; sample windows that match nothing
    are only counted, never used in statistics.
    """
    if cov is None:
        cov = OrbitCovariance(sigma_pos=0.0, n_samples=len(samples))
    if len(samples) == 0:
        raise ValueError("ensemble requires at least one sample")

    epoch0 = samples[0].epoch
    r0 = np.array([s.position for s in samples])
    v0 = np.array([s.velocity for s in samples])
    offsets, states = propagate_rk4_batch(epoch0, r0, v0, sc, cfg, duration, step)

    def windows_for(i: int) -> dict[int, list[Opportunity]]:
        traj = Trajectory(epoch0, step, offsets, states[i])
        return find_opportunities(traj, targets)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sample_windows = list(pool.map(windows_for, range(len(samples))))
    else:
        sample_windows = [windows_for(i) for i in range(len(samples))]

    window_refs: list[tuple[int, int]] = []
    nominal_mid: dict[int, np.ndarray] = {}
    cutoff: dict[int, np.ndarray] = {}
    for image_id, windows in nominal_windows.items():
        mids = np.array([w.midpoint_seconds for w in windows])
        nominal_mid[image_id] = mids
        if len(mids) >= 2:
            gaps = np.diff(mids)
            lo = np.concatenate([[np.inf], gaps]) / 2.0
            hi = np.concatenate([gaps, [np.inf]]) / 2.0
            cutoff[image_id] = np.minimum(lo, hi)
        else:
            cutoff[image_id] = np.full(len(mids), np.inf)
        for k in range(len(windows)):
            window_refs.append((image_id, k))

    row_of = {ref: row for row, ref in enumerate(window_refs)}
    n_rows = len(window_refs)
    n_samples = len(samples)
    starts = np.full((n_rows, n_samples), np.nan)
    durations = np.full((n_rows, n_samples), np.nan)
    unmatched = 0

    for j, windows_by_image in enumerate(sample_windows):
        for image_id, windows in windows_by_image.items():
            mids = nominal_mid.get(image_id)
            if mids is None or len(mids) == 0:
                unmatched += len(windows)
                continue
            # Best sample window per nominal window, nearest midpoint wins.
            best_dist = np.full(len(mids), np.inf)
            best_window: list[Opportunity | None] = [None] * len(mids)
            for w in windows:
                dist = np.abs(mids - w.midpoint_seconds)
                k = int(np.argmin(dist))
                if dist[k] <= cutoff[image_id][k] and dist[k] < best_dist[k]:
                    if best_window[k] is not None:
                        unmatched += 1
                    best_dist[k] = dist[k]
                    best_window[k] = w
                else:
                    unmatched += 1
            for k, w in enumerate(best_window):
                if w is not None:
                    row = row_of[(image_id, k)]
                    starts[row, j] = w.t_start.seconds
                    durations[row, j] = w.duration

    return EnsembleWindows(
        covariance=cov,
        nominal=nominal_windows,
        sample_windows=sample_windows,
        window_refs=window_refs,
        matched_starts=starts,
        matched_durations=durations,
        unmatched_windows=unmatched,
        t0_seconds=epoch0.seconds,
        horizon_s=duration,
    )


def window_statistics(ensemble: EnsembleWindows, bucket_s: float = 3600.0) -> WindowStatistics:
    """Bucketed start-time standard deviation over the matched ensemble.

    Each nominal window with at least two matched samples contributes its
    sample standard deviation of matched start times; buckets average those
    per-window deviations.  The ratio denominator is the mean matched window
    duration over the whole run.
    """
    if ensemble.matched_starts.size == 0:
        return WindowStatistics((), (), 0.0, ())

    n_buckets = max(1, int(math.ceil(ensemble.horizon_s / bucket_s - 1e-9)))
    sums = np.zeros(n_buckets)
    counts = np.zeros(n_buckets, dtype=int)

    nominal_start = np.array([
        ensemble.nominal[img][k].t_start.seconds - ensemble.t0_seconds
        for img, k in ensemble.window_refs
    ])
    buckets = np.clip((nominal_start / bucket_s).astype(int), 0, n_buckets - 1)

    for row in range(ensemble.matched_starts.shape[0]):
        values = ensemble.matched_starts[row]
        values = values[~np.isnan(values)]
        if len(values) >= 2:
            sums[buckets[row]] += float(np.std(values, ddof=1))
            counts[buckets[row]] += 1

    durations = ensemble.matched_durations[~np.isnan(ensemble.matched_durations)]
    mean_duration = float(np.mean(durations)) if durations.size else 0.0

    sigma = tuple(
        float(sums[b] / counts[b]) if counts[b] > 0 else 0.0 for b in range(n_buckets)
    )
    low = tuple(b + 1 for b in range(n_buckets) if counts[b] == 0)
    return WindowStatistics(
        bucket_hours=tuple(range(1, n_buckets + 1)),
        sigma_start_s=sigma,
        mean_duration_s=mean_duration,
        low_sample_buckets=low,
    )


def collect_probabilities(collects: list[Collect],
                          ensemble: EnsembleWindows) -> CollectProbabilityTable:
    """Fraction of samples in which each collect fits inside a single window."""
    n_samples = len(ensemble.sample_windows)
    counts = {c.id: 0 for c in collects}
    by_image: dict[int, list[Collect]] = {}
    for c in collects:
        by_image.setdefault(c.image_id, []).append(c)

    for windows_by_image in ensemble.sample_windows:
        for image_id, cands in by_image.items():
            windows = windows_by_image.get(image_id, [])
            if not windows:
                continue
            bounds = [(w.t_start.seconds, w.t_end.seconds) for w in windows]
            for c in cands:
                cs_, ce_ = c.t_start.seconds, c.t_end.seconds
                for lo, hi in bounds:
                    if lo <= cs_ and ce_ <= hi:
                        counts[c.id] += 1
                        break

    return CollectProbabilityTable(
        probabilities={cid: counts[cid] / n_samples for cid in counts},
        sigma_pos=ensemble.covariance.sigma_pos,
        n_samples=n_samples,
        seed=ensemble.covariance.seed,
    )


def collect_probabilities_to_json(table: CollectProbabilityTable, path) -> None:
    with open(path, "w") as fh:
        json.dump(table.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def collect_probabilities_from_json(path) -> CollectProbabilityTable:
    with open(path) as fh:
        return CollectProbabilityTable.from_json_dict(json.load(fh))
