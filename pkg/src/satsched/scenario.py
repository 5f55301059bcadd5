"""Scenario configuration: orbit, spacecraft, targets, uncertainty, planners.

A scenario is a single JSON document; loading materializes every default so
the manifest written next to the run artifacts pins the complete effective
configuration (no hidden defaults can change a rerun).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .access import (
    DEFAULT_COLLECT_DURATION_S,
    DEFAULT_LOOK_ANGLE_MAX_DEG,
    ConstraintSet,
    ImageTarget,
)
from .astro import Epoch, GeodeticPoint, StateVector
from .constants import GM_EARTH, R_EARTH_EQ
from .dynamics import ForceModelConfig, SpacecraftParams
from .uncertainty import OrbitCovariance


class ConfigError(ValueError):
    """Scenario file invalid or inconsistent (CLI exit code 2)."""


@dataclass(frozen=True)
class OrbitSpec:
    altitude_m: float = 550e3
    inclination_deg: float = 90.0
    raan_deg: float = 0.0
    eccentricity: float = 0.0
    arg_perigee_deg: float = 0.0
    true_anomaly_deg: float = 0.0

    def initial_state(self, epoch: Epoch) -> StateVector:
        """Cartesian inertial state from the Keplerian elements."""
        a = R_EARTH_EQ + self.altitude_m
        e = self.eccentricity
        nu = math.radians(self.true_anomaly_deg)
        p = a * (1.0 - e * e)
        r_mag = p / (1.0 + e * math.cos(nu))
        r_pqw = np.array([r_mag * math.cos(nu), r_mag * math.sin(nu), 0.0])
        v_scale = math.sqrt(GM_EARTH / p)
        v_pqw = np.array([-v_scale * math.sin(nu), v_scale * (e + math.cos(nu)), 0.0])

        rot = _rot_z(math.radians(self.raan_deg)) @ _rot_x(math.radians(self.inclination_deg)) \
            @ _rot_z(math.radians(self.arg_perigee_deg))
        return StateVector(epoch, rot @ r_pqw, rot @ v_pqw)


def _rot_z(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_x(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


@dataclass(frozen=True)
class TargetSpec:
    """Either a target file path or a random-generation recipe."""

    file: str | None = None
    count: int = 100
    seed: int = 42
    reward: float = 1.0
    theta_max_deg: float = DEFAULT_LOOK_ANGLE_MAX_DEG
    collect_duration_s: float = DEFAULT_COLLECT_DURATION_S


@dataclass(frozen=True)
class UncertaintySpec:
    sigma_pos_m: float = 1000.0
    n_samples: int = 10
    seed: int = 1
    # Reserved hook for stochastic force-parameter sampling (unused).
    density_scale_sampling: None = None

    def covariance(self) -> OrbitCovariance:
        return OrbitCovariance(self.sigma_pos_m, self.n_samples, self.seed)


@dataclass(frozen=True)
class PlannerSpec:
    names: tuple[str, ...] = ("graph", "milp", "mdp")
    mdp_depth: int = 2
    lookahead_s: float = 600.0
    max_slew_rate_deg_s: float = 1.0
    milp_time_limit_s: float = 30.0
    gamma: float = 1.0

    def constraint_set(self) -> ConstraintSet:
        return ConstraintSet(
            max_slew_rate=math.radians(self.max_slew_rate_deg_s),
            lookahead=self.lookahead_s,
        )


@dataclass(frozen=True)
class EvaluationSpec:
    n_samples: int = 100
    seed: int = 2

    def covariance(self, sigma_pos_m: float) -> OrbitCovariance:
        return OrbitCovariance(sigma_pos_m, self.n_samples, self.seed)


@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    start_epoch: str = "2026-03-21T00:00:00"
    duration_s: float = 86400.0
    orbit: OrbitSpec = field(default_factory=OrbitSpec)
    spacecraft: SpacecraftParams = field(default_factory=SpacecraftParams)
    force_model: ForceModelConfig = field(default_factory=ForceModelConfig)
    propagation_step_s: float = 10.0
    targets: TargetSpec = field(default_factory=TargetSpec)
    uncertainty: UncertaintySpec = field(default_factory=UncertaintySpec)
    planners: PlannerSpec = field(default_factory=PlannerSpec)
    evaluation: EvaluationSpec = field(default_factory=EvaluationSpec)

    def epoch(self) -> Epoch:
        return Epoch.from_isoformat(self.start_epoch)

    def initial_state(self) -> StateVector:
        return self.orbit.initial_state(self.epoch())

    def validate(self) -> None:
        import os

        if self.duration_s <= 0:
            raise ConfigError("duration_s must be positive")
        if not 200e3 <= self.orbit.altitude_m <= 2000e3:
            raise ConfigError("orbit altitude must lie in [200, 2000] km")
        if self.propagation_step_s <= 0:
            raise ConfigError("propagation step must be positive")
        unknown = set(self.planners.names) - {"graph", "milp", "mdp"}
        if unknown:
            raise ConfigError(f"unknown planners: {sorted(unknown)}")
        if self.targets.file is not None and not os.path.exists(self.targets.file):
            raise ConfigError(f"target file not found: {self.targets.file}")
        try:
            self.epoch()
        except ValueError as exc:
            raise ConfigError(f"invalid start epoch: {exc}") from exc

    def to_json_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Scenario":
        try:
            scenario = cls(
                name=doc.get("name", "scenario"),
                start_epoch=doc.get("start_epoch", "2026-03-21T00:00:00"),
                duration_s=float(doc.get("duration_s", 86400.0)),
                orbit=OrbitSpec(**doc.get("orbit", {})),
                spacecraft=SpacecraftParams(**doc.get("spacecraft", {})),
                force_model=ForceModelConfig(**doc.get("force_model", {})),
                propagation_step_s=float(doc.get("propagation_step_s", 10.0)),
                targets=TargetSpec(**doc.get("targets", {})),
                uncertainty=UncertaintySpec(**doc.get("uncertainty", {})),
                planners=PlannerSpec(**_tuplify(doc.get("planners", {}), "names")),
                evaluation=EvaluationSpec(**doc.get("evaluation", {})),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid scenario document: {exc}") from exc
        scenario.validate()
        return scenario

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"scenario file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scenario file is not valid JSON: {exc}") from exc
        return cls.from_json_dict(doc)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _tuplify(doc: dict, key: str) -> dict:
    doc = dict(doc)
    if key in doc and isinstance(doc[key], list):
        doc[key] = tuple(doc[key])
    return doc


def generate_targets(count: int, seed: int, reward: float = 1.0,
                     theta_max_deg: float = DEFAULT_LOOK_ANGLE_MAX_DEG,
                     collect_duration_s: float = DEFAULT_COLLECT_DURATION_S) -> list[ImageTarget]:
    """Uniformly distributed targets on the sphere, deterministic by seed."""
    if count < 1:
        raise ConfigError("target count must be >= 1")
    rng = np.random.default_rng(seed)
    theta_max = math.radians(theta_max_deg)
    targets = []
    for i in range(count):
        lat = math.asin(rng.uniform(-1.0, 1.0))
        lon = rng.uniform(-math.pi, math.pi)
        targets.append(
            ImageTarget(
                id=i,
                center=GeodeticPoint(lat, lon, 0.0),
                reward=reward,
                look_angle_max=theta_max,
                collect_duration=collect_duration_s,
            )
        )
    return targets


def resolve_targets(spec: TargetSpec) -> list[ImageTarget]:
    from .access import load_targets

    if spec.file is not None:
        try:
            return load_targets(spec.file)
        except FileNotFoundError as exc:
            raise ConfigError(f"target file not found: {spec.file}") from exc
    return generate_targets(
        spec.count, spec.seed, spec.reward, spec.theta_max_deg, spec.collect_duration_s
    )
