"""Perturbation force models and the total acceleration of the spacecraft.

The total acceleration is the sum of spherical-harmonic Earth gravity plus
optional atmospheric drag, solar radiation pressure, Sun/Moon third-body
gravity and a first-order relativistic correction.  Every term can be
toggled individually; with everything off and gravity degree 0 the model
reduces exactly to the point-mass two-body problem.

All evaluators are pure and accept either a single state or a batch of
states (leading axis), which lets an ensemble of Monte Carlo trajectories
integrate in lockstep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..astro import (
    Epoch,
    StateVector,
    earth_rotation_angle,
    geodetic_altitude,
    moon_position,
    sun_position,
)
from ..constants import (
    AU,
    GM_EARTH,
    GM_MOON,
    GM_SUN,
    OMEGA_EARTH,
    P_SRP_1AU,
    R_EARTH_EQ,
    R_SUN,
    SPEED_OF_LIGHT,
)
from .atmosphere import ALTITUDE_CEILING_M, ALTITUDE_FLOOR_M, harris_priester_density
from .gravity import GravityField, bundled_field


class ReentryError(RuntimeError):
    """Raised when a propagated state drops below the drag-model floor."""

    def __init__(self, message: str, sample_indices=None):
        super().__init__(message)
        self.sample_indices = tuple(sample_indices or ())


@dataclass(frozen=True)
class SpacecraftParams:
    """Cannon-ball drag / flat-plate radiation-pressure spacecraft model."""

    mass: float = 100.0
    drag_area: float = 1.0
    drag_coefficient: float = 2.3
    srp_area: float = 1.0
    reflectivity_coefficient: float = 1.8

    def __post_init__(self):
        if min(self.mass, self.drag_area, self.drag_coefficient, self.srp_area,
               self.reflectivity_coefficient) <= 0.0:
            raise ValueError("spacecraft parameters must be strictly positive")
        if not 1.5 <= self.drag_coefficient <= 3.0:
            raise ValueError(f"drag coefficient {self.drag_coefficient} outside [1.5, 3.0]")
        if not 1.0 <= self.reflectivity_coefficient <= 2.0:
            raise ValueError(
                f"reflectivity coefficient {self.reflectivity_coefficient} outside [1.0, 2.0]"
            )


@dataclass(frozen=True)
class ForceModelConfig:
    """Selection of force-model terms and gravity truncation.

    ``extra_acceleration`` is an extension hook for additional perturbations:
    a callable ``(epoch, r (N,3), v (N,3)) -> (N,3)`` added to the total when
    set (defaults to nothing, i.e. zero).
    """

    gravity_degree: int = 10
    gravity_order: int = 10
    drag: bool = True
    srp: bool = True
    third_body_sun: bool = True
    third_body_moon: bool = True
    relativity: bool = True
    extra_acceleration: object = None

    def __post_init__(self):
        if self.gravity_degree < 0:
            raise ValueError("gravity degree must be >= 0")
        if self.gravity_order > self.gravity_degree:
            raise ValueError("gravity order must not exceed gravity degree")
        if self.extra_acceleration is not None and not callable(self.extra_acceleration):
            raise ValueError("extra_acceleration must be callable or None")

    @classmethod
    def two_body(cls) -> "ForceModelConfig":
        return cls(gravity_degree=0, gravity_order=0, drag=False, srp=False,
                   third_body_sun=False, third_body_moon=False, relativity=False)


def conical_shadow_factor(r: np.ndarray, sun_pos: np.ndarray):
    """Illumination fraction for the conical Earth-shadow model.

    Returns 1 in full sunlight, 0 in the umbra and the visible-disk
    fraction inside the penumbra.  Accepts (3,) or (N, 3) positions.
    """
    rr = np.asarray(r, dtype=float)
    single = rr.ndim == 1
    rr = np.atleast_2d(rr)
    s = np.asarray(sun_pos, dtype=float)

    d = s - rr
    d_norm = np.linalg.norm(d, axis=-1)
    r_norm = np.linalg.norm(rr, axis=-1)

    # Apparent angular radii of the Sun and the Earth, and their separation.
    a = np.arcsin(np.clip(R_SUN / d_norm, -1.0, 1.0))
    b = np.arcsin(np.clip(R_EARTH_EQ / r_norm, -1.0, 1.0))
    cos_c = -np.sum(rr * d, axis=-1) / (r_norm * d_norm)
    c = np.arccos(np.clip(cos_c, -1.0, 1.0))

    with np.errstate(invalid="ignore", divide="ignore"):
        x = (c * c + a * a - b * b) / (2.0 * np.maximum(c, 1e-12))
        y = np.sqrt(np.maximum(a * a - x * x, 0.0))
        area = (
            a * a * np.arccos(np.clip(x / a, -1.0, 1.0))
            + b * b * np.arccos(np.clip((c - x) / np.maximum(b, 1e-12), -1.0, 1.0))
            - c * y
        )
        partial = 1.0 - area / (math.pi * a * a)

    nu = np.where(c >= a + b, 1.0, np.where(c <= b - a, 0.0, partial))
    nu = np.clip(nu, 0.0, 1.0)
    return float(nu[0]) if single else nu


def srp_acceleration(r: np.ndarray, sun_pos: np.ndarray, sc: SpacecraftParams):
    """Solar radiation pressure acceleration [m/s^2], shadow included."""
    rr = np.asarray(r, dtype=float)
    single = rr.ndim == 1
    rr = np.atleast_2d(rr)
    s = np.asarray(sun_pos, dtype=float)

    d = rr - s  # Sun -> spacecraft
    d_norm = np.linalg.norm(d, axis=-1, keepdims=True)
    nu = np.atleast_1d(conical_shadow_factor(rr, s))[:, None]
    pressure = P_SRP_1AU * (AU / d_norm) ** 2
    accel = nu * pressure * sc.reflectivity_coefficient * sc.srp_area / sc.mass * (d / d_norm)
    return accel[0] if single else accel


def third_body_acceleration(r: np.ndarray, body_pos: np.ndarray, gm_body: float):
    """Differential third-body acceleration gm * ((s-r)/|s-r|^3 - s/|s|^3)."""
    rr = np.asarray(r, dtype=float)
    single = rr.ndim == 1
    rr = np.atleast_2d(rr)
    s = np.asarray(body_pos, dtype=float)

    rel = s - rr
    rel_n3 = np.linalg.norm(rel, axis=-1, keepdims=True) ** 3
    s_n3 = float(np.linalg.norm(s)) ** 3
    accel = gm_body * (rel / rel_n3 - s / s_n3)
    return accel[0] if single else accel


def relativistic_correction(r: np.ndarray, v: np.ndarray, gm: float = GM_EARTH):
    """First-order post-Newtonian point-mass correction [m/s^2]."""
    rr = np.asarray(r, dtype=float)
    single = rr.ndim == 1
    rr = np.atleast_2d(rr)
    vv = np.atleast_2d(np.asarray(v, dtype=float))

    r_norm = np.linalg.norm(rr, axis=-1, keepdims=True)
    v2 = np.sum(vv * vv, axis=-1, keepdims=True)
    rv = np.sum(rr * vv, axis=-1, keepdims=True)
    coeff = gm / (SPEED_OF_LIGHT ** 2 * r_norm ** 3)
    accel = coeff * ((4.0 * gm / r_norm - v2) * rr + 4.0 * rv * vv)
    return accel[0] if single else accel


def drag_acceleration(r_eci: np.ndarray, v_eci: np.ndarray, r_ecef: np.ndarray,
                      sun_dir_ecef: np.ndarray, sc: SpacecraftParams):
    """Cannon-ball drag against a co-rotating Harris-Priester atmosphere."""
    rho = np.atleast_1d(harris_priester_density(r_ecef, sun_dir_ecef))[:, None]
    # Atmosphere-relative velocity, co-rotating atmosphere without winds.
    omega = np.array([0.0, 0.0, OMEGA_EARTH])
    v_rel = v_eci - np.cross(np.broadcast_to(omega, v_eci.shape), r_eci)
    v_rel_norm = np.linalg.norm(v_rel, axis=-1, keepdims=True)
    factor = -0.5 * rho * sc.drag_coefficient * sc.drag_area / sc.mass
    return factor * v_rel_norm * v_rel


def acceleration(epoch: Epoch, state: StateVector, sc: SpacecraftParams,
                 cfg: ForceModelConfig, gravity_field: GravityField | None = None) -> np.ndarray:
    """Total acceleration [m/s^2] of a single state under ``cfg``.

    Raises:
        ReentryError: when the state is below the 100 km drag-model floor.
    """
    r = np.atleast_2d(state.position)
    v = np.atleast_2d(state.velocity)
    return _acceleration_batch(epoch, r, v, sc, cfg, gravity_field or bundled_field())[0]


def _acceleration_batch(epoch: Epoch, r: np.ndarray, v: np.ndarray,
                        sc: SpacecraftParams, cfg: ForceModelConfig,
                        field: GravityField) -> np.ndarray:
    """Batched total acceleration for positions/velocities of shape (N, 3)."""
    if cfg.gravity_degree == 0 and cfg.extra_acceleration is None and not any(
        (cfg.drag, cfg.srp, cfg.third_body_sun, cfg.third_body_moon, cfg.relativity)
    ):
        # Pure two-body shortcut: exact -GM r / |r|^3.
        r_norm3 = np.linalg.norm(r, axis=-1, keepdims=True) ** 3
        return -field.gm * r / r_norm3

    theta = earth_rotation_angle(epoch)
    c, s = math.cos(theta), math.sin(theta)
    r_ecef = np.empty_like(r)
    r_ecef[:, 0] = c * r[:, 0] + s * r[:, 1]
    r_ecef[:, 1] = -s * r[:, 0] + c * r[:, 1]
    r_ecef[:, 2] = r[:, 2]

    if cfg.drag:
        alt = geodetic_altitude(r_ecef)
        if np.any(alt < ALTITUDE_FLOOR_M):
            idx = np.nonzero(alt < ALTITUDE_FLOOR_M)[0]
            raise ReentryError(
                f"altitude {float(np.min(alt)) / 1e3:.1f} km below the 100 km "
                "drag-model floor (re-entry)",
                sample_indices=idx.tolist(),
            )

    if cfg.gravity_degree == 0:
        r_norm3 = np.linalg.norm(r, axis=-1, keepdims=True) ** 3
        total = -field.gm * r / r_norm3
    else:
        a_ecef = field.acceleration_ecef(r_ecef, cfg.gravity_degree, cfg.gravity_order)
        total = np.empty_like(a_ecef)
        total[:, 0] = c * a_ecef[:, 0] - s * a_ecef[:, 1]
        total[:, 1] = s * a_ecef[:, 0] + c * a_ecef[:, 1]
        total[:, 2] = a_ecef[:, 2]

    need_sun = cfg.drag or cfg.srp or cfg.third_body_sun
    if need_sun:
        r_sun = sun_position(epoch)

    if cfg.drag:
        # Above the table ceiling the density is treated as zero.
        below = alt <= ALTITUDE_CEILING_M
        if np.any(below):
            sun_ecef = np.array([
                c * r_sun[0] + s * r_sun[1],
                -s * r_sun[0] + c * r_sun[1],
                r_sun[2],
            ])
            if np.all(below):
                total = total + drag_acceleration(r, v, r_ecef, sun_ecef, sc)
            else:
                total[below] += drag_acceleration(
                    r[below], v[below], r_ecef[below], sun_ecef, sc
                )

    if cfg.srp:
        total = total + srp_acceleration(r, r_sun, sc)
    if cfg.third_body_sun:
        total = total + third_body_acceleration(r, r_sun, GM_SUN)
    if cfg.third_body_moon:
        total = total + third_body_acceleration(r, moon_position(epoch), GM_MOON)
    if cfg.relativity:
        total = total + relativistic_correction(r, v, field.gm)
    if cfg.extra_acceleration is not None:
        total = total + cfg.extra_acceleration(epoch, r, v)
    return total
