"""Time scale, reference frames, geodetic conversions and analytic ephemerides.

A single uniform time scale is used throughout: continuous seconds past the
J2000 reference epoch (2000-01-01T12:00:00), with no leap seconds or
UT1/UTC distinction.  Earth orientation is reduced to one rotation about the
spin axis by ``theta(t) = THETA_J2000 + OMEGA_EARTH * t``; precession,
nutation and polar motion are out of scope.

Frames:
    ECI   Earth-centered inertial (x toward the rotation-angle origin).
    ECEF  Earth-centered Earth-fixed, co-rotating at OMEGA_EARTH.

All functions are pure and all types immutable, so everything here is safe
for unrestricted concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .constants import (
    AU,
    OBLIQUITY_J2000,
    OMEGA_EARTH,
    R_EARTH_EQ,
    THETA_J2000,
    WGS84_E2,
)

_J2000_DATETIME = datetime(2000, 1, 1, 12, 0, 0)


@dataclass(frozen=True)
class Epoch:
    """An instant on the uniform mission time scale.

    ``seconds`` is the offset from the J2000 reference epoch.  ``provenance``
    records the calendar string the epoch was constructed from (empty for
    epochs derived by arithmetic).
    """

    seconds: float
    provenance: str = field(default="", compare=False)

    @classmethod
    def from_isoformat(cls, text: str) -> "Epoch":
        dt = datetime.fromisoformat(text)
        if dt.tzinfo is not None:
            dt = dt.replace(tzinfo=None)
        delta = dt - _J2000_DATETIME
        return cls(delta.total_seconds(), provenance=text)

    def isoformat(self) -> str:
        # Round to whole microseconds so serialization round-trips exactly.
        micros = round(self.seconds * 1e6)
        dt = _J2000_DATETIME + timedelta(microseconds=micros)
        return dt.isoformat()

    def __add__(self, dt_s: float) -> "Epoch":
        return Epoch(self.seconds + float(dt_s))

    def __radd__(self, dt_s: float) -> "Epoch":
        return self.__add__(dt_s)

    def __sub__(self, other):
        if isinstance(other, Epoch):
            return self.seconds - other.seconds
        return Epoch(self.seconds - float(other))

    def __lt__(self, other: "Epoch") -> bool:
        return self.seconds < other.seconds

    def __le__(self, other: "Epoch") -> bool:
        return self.seconds <= other.seconds

    def __gt__(self, other: "Epoch") -> bool:
        return self.seconds > other.seconds

    def __ge__(self, other: "Epoch") -> bool:
        return self.seconds >= other.seconds


@dataclass(frozen=True)
class StateVector:
    """Inertial position [m] and velocity [m/s] at an epoch."""

    epoch: Epoch
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity)))

    def radius(self) -> float:
        return float(np.linalg.norm(self.position))


@dataclass(frozen=True)
class GeodeticPoint:
    """WGS-84 geodetic coordinates: latitude/longitude [rad], altitude [m]."""

    latitude: float
    longitude: float
    altitude: float = 0.0

    def __post_init__(self):
        if not -math.pi / 2 <= self.latitude <= math.pi / 2:
            raise ValueError(f"latitude {self.latitude} outside [-pi/2, pi/2]")
        # Normalize longitude into [-pi, pi).
        lon = (self.longitude + math.pi) % (2.0 * math.pi) - math.pi
        object.__setattr__(self, "longitude", lon)


def earth_rotation_angle(epoch: Epoch) -> float:
    """Rotation angle of the ECEF frame relative to ECI at ``epoch`` [rad]."""
    return THETA_J2000 + OMEGA_EARTH * epoch.seconds


def eci_to_ecef(epoch: Epoch, r_eci: np.ndarray) -> np.ndarray:
    """Rotate an inertial vector into the Earth-fixed frame."""
    theta = earth_rotation_angle(epoch)
    c, s = math.cos(theta), math.sin(theta)
    r = np.asarray(r_eci, dtype=float)
    return np.array([c * r[0] + s * r[1], -s * r[0] + c * r[1], r[2]])


def ecef_to_eci(epoch: Epoch, r_ecef: np.ndarray) -> np.ndarray:
    """Rotate an Earth-fixed vector into the inertial frame."""
    theta = earth_rotation_angle(epoch)
    c, s = math.cos(theta), math.sin(theta)
    r = np.asarray(r_ecef, dtype=float)
    return np.array([c * r[0] - s * r[1], s * r[0] + c * r[1], r[2]])


def geodetic_to_ecef(point: GeodeticPoint) -> np.ndarray:
    """WGS-84 geodetic coordinates to Earth-fixed Cartesian [m]."""
    slat, clat = math.sin(point.latitude), math.cos(point.latitude)
    n = R_EARTH_EQ / math.sqrt(1.0 - WGS84_E2 * slat * slat)
    x = (n + point.altitude) * clat * math.cos(point.longitude)
    y = (n + point.altitude) * clat * math.sin(point.longitude)
    z = (n * (1.0 - WGS84_E2) + point.altitude) * slat
    return np.array([x, y, z])


def ecef_to_geodetic(r_ecef: np.ndarray) -> GeodeticPoint:
    """Earth-fixed Cartesian to WGS-84 geodetic coordinates.

    Uses fixed-point iteration on the geodetic latitude; converges far below
    the 1e-6 rad / 1e-3 m round-trip tolerance for any practical input.

    Raises:
        ValueError: for the degenerate input at the exact geocenter.
    """
    r = np.asarray(r_ecef, dtype=float)
    x, y, z = float(r[0]), float(r[1]), float(r[2])
    p = math.hypot(x, y)
    if p == 0.0 and z == 0.0:
        raise ValueError("geodetic conversion undefined at the geocenter")
    lon = math.atan2(y, x) if p > 0.0 else 0.0
    if p < 1e-9:
        # On the polar axis the latitude is exactly +/-90 deg.
        lat = math.copysign(math.pi / 2, z)
        alt = abs(z) - R_EARTH_EQ * math.sqrt(1.0 - WGS84_E2)
        return GeodeticPoint(lat, lon, alt)

    lat = math.atan2(z, p * (1.0 - WGS84_E2))
    for _ in range(12):
        slat = math.sin(lat)
        n = R_EARTH_EQ / math.sqrt(1.0 - WGS84_E2 * slat * slat)
        alt = p / math.cos(lat) - n
        new_lat = math.atan2(z, p * (1.0 - WGS84_E2 * n / (n + alt)))
        if abs(new_lat - lat) < 1e-14:
            lat = new_lat
            break
        lat = new_lat
    slat = math.sin(lat)
    n = R_EARTH_EQ / math.sqrt(1.0 - WGS84_E2 * slat * slat)
    alt = p / math.cos(lat) - n
    return GeodeticPoint(lat, lon, alt)


def geodetic_altitude(r_ecef: np.ndarray) -> np.ndarray:
    """Vectorized WGS-84 altitude [m] for positions of shape (..., 3)."""
    r = np.asarray(r_ecef, dtype=float)
    x, y, z = r[..., 0], r[..., 1], r[..., 2]
    p = np.hypot(x, y)
    lat = np.arctan2(z, p * (1.0 - WGS84_E2))
    for _ in range(5):
        slat = np.sin(lat)
        n = R_EARTH_EQ / np.sqrt(1.0 - WGS84_E2 * slat * slat)
        alt = p / np.maximum(np.cos(lat), 1e-12) - n
        lat = np.arctan2(z, p * (1.0 - WGS84_E2 * n / (n + alt)))
    slat = np.sin(lat)
    n = R_EARTH_EQ / np.sqrt(1.0 - WGS84_E2 * slat * slat)
    clat = np.cos(lat)
    # Near the poles fall back to the axial expression.
    alt = np.where(
        clat > 1e-6,
        p / np.maximum(clat, 1e-12) - n,
        np.abs(z) - R_EARTH_EQ * np.sqrt(1.0 - WGS84_E2),
    )
    return alt


def sun_position(epoch: Epoch) -> np.ndarray:
    """Geocentric inertial Sun position [m] from a low-precision analytic series.

    Accuracy is of order 0.1-1 deg in direction and well under 1% in
    distance, which is sufficient for the radiation-pressure and third-body
    terms it feeds.
    """
    t = epoch.seconds / (86400.0 * 36525.0)  # Julian centuries past J2000
    mean_anom = math.radians(357.5256 + 35999.049 * t)
    lon = (
        math.radians(282.9400)
        + mean_anom
        + math.radians(6892.0 / 3600.0) * math.sin(mean_anom)
        + math.radians(72.0 / 3600.0) * math.sin(2.0 * mean_anom)
    )
    dist = (149.619 - 2.499 * math.cos(mean_anom) - 0.021 * math.cos(2.0 * mean_anom)) * 1e9
    ce, se = math.cos(OBLIQUITY_J2000), math.sin(OBLIQUITY_J2000)
    return dist * np.array([math.cos(lon), ce * math.sin(lon), se * math.sin(lon)])


def moon_position(epoch: Epoch) -> np.ndarray:
    """Geocentric inertial Moon position [m] from a low-precision analytic series.

    Truncated lunar theory with the dominant evection/variation terms;
    direction errors stay below a degree over multi-week spans.
    """
    t = epoch.seconds / (86400.0 * 36525.0)

    def _rev(deg: float) -> float:
        return math.radians(deg % 360.0)

    l0 = _rev(218.31617 + 481267.88088 * t)  # mean longitude
    l = _rev(134.96292 + 477198.86753 * t)  # mean anomaly (Moon)
    lp = _rev(357.52543 + 35999.04944 * t)  # mean anomaly (Sun)
    f = _rev(93.27283 + 483202.01873 * t)  # argument of latitude
    d = _rev(297.85027 + 445267.11135 * t)  # mean elongation

    dlon_arcsec = (
        22640.0 * math.sin(l)
        + 769.0 * math.sin(2.0 * l)
        - 4586.0 * math.sin(l - 2.0 * d)
        + 2370.0 * math.sin(2.0 * d)
        - 668.0 * math.sin(lp)
        - 412.0 * math.sin(2.0 * f)
        - 212.0 * math.sin(2.0 * l - 2.0 * d)
        - 206.0 * math.sin(l + lp - 2.0 * d)
        + 192.0 * math.sin(l + 2.0 * d)
        - 165.0 * math.sin(lp - 2.0 * d)
        + 148.0 * math.sin(l - lp)
        - 125.0 * math.sin(d)
        - 110.0 * math.sin(l + lp)
        - 55.0 * math.sin(2.0 * f - 2.0 * d)
    )
    lon = l0 + math.radians(dlon_arcsec / 3600.0)

    s = f + math.radians((dlon_arcsec + 412.0 * math.sin(2.0 * f) + 541.0 * math.sin(lp)) / 3600.0)
    h = f - 2.0 * d
    beta_arcsec = (
        18520.0 * math.sin(s)
        - 526.0 * math.sin(h)
        + 44.0 * math.sin(l + h)
        - 31.0 * math.sin(-l + h)
        - 25.0 * math.sin(-2.0 * l + f)
        - 23.0 * math.sin(lp + h)
        + 21.0 * math.sin(-l + f)
        + 11.0 * math.sin(-lp + h)
    )
    beta = math.radians(beta_arcsec / 3600.0)

    dist = (
        385000.0
        - 20905.0 * math.cos(l)
        - 3699.0 * math.cos(2.0 * d - l)
        - 2956.0 * math.cos(2.0 * d)
        - 570.0 * math.cos(2.0 * l)
        + 246.0 * math.cos(2.0 * l - 2.0 * d)
        - 205.0 * math.cos(lp - 2.0 * d)
        - 171.0 * math.cos(l + 2.0 * d)
        - 152.0 * math.cos(l + lp - 2.0 * d)
    ) * 1e3

    # Ecliptic to equatorial.
    cb, sb = math.cos(beta), math.sin(beta)
    cl, sl = math.cos(lon), math.sin(lon)
    ce, se = math.cos(OBLIQUITY_J2000), math.sin(OBLIQUITY_J2000)
    x = cb * cl
    y = ce * cb * sl - se * sb
    z = se * cb * sl + ce * sb
    return dist * np.array([x, y, z])


def sun_distance_scale(r: np.ndarray, r_sun: np.ndarray) -> float:
    """(AU / spacecraft-Sun distance)^2, the SRP inverse-square scale factor."""
    d = np.asarray(r, dtype=float) - np.asarray(r_sun, dtype=float)
    return float((AU / np.linalg.norm(d)) ** 2)
