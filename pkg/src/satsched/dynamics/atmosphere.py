"""Harris-Priester upper-atmosphere density model.

Mean solar-activity min/max density profiles tabulated from 100 to 1000 km,
exponentially interpolated in altitude, with the diurnal bulge applied as
a cosine power of half the angle from the bulge apex.  The apex lags the
Sun by 30 degrees of rotation about the Earth spin axis.
"""

from __future__ import annotations

import math

import numpy as np

from ..astro import geodetic_altitude

# Altitude [km], min density, max density [g/km^3].
_HP_TABLE = np.array([
    [100.0, 497400.0, 497400.0],
    [120.0, 24900.0, 24900.0],
    [130.0, 8377.0, 8710.0],
    [140.0, 3899.0, 4059.0],
    [150.0, 2122.0, 2215.0],
    [160.0, 1263.0, 1344.0],
    [170.0, 800.8, 875.8],
    [180.0, 528.3, 601.0],
    [190.0, 361.7, 429.7],
    [200.0, 255.7, 316.2],
    [210.0, 183.9, 239.6],
    [220.0, 134.1, 185.3],
    [230.0, 99.49, 145.5],
    [240.0, 74.88, 115.7],
    [250.0, 57.09, 93.08],
    [260.0, 44.03, 75.55],
    [270.0, 34.30, 61.82],
    [280.0, 26.97, 50.95],
    [290.0, 21.39, 42.26],
    [300.0, 17.08, 35.26],
    [320.0, 10.99, 25.11],
    [340.0, 7.214, 18.19],
    [360.0, 4.824, 13.37],
    [380.0, 3.274, 9.955],
    [400.0, 2.249, 7.492],
    [420.0, 1.558, 5.684],
    [440.0, 1.091, 4.355],
    [460.0, 0.7701, 3.362],
    [480.0, 0.5474, 2.612],
    [500.0, 0.3916, 2.042],
    [520.0, 0.2819, 1.605],
    [540.0, 0.2042, 1.267],
    [560.0, 0.1488, 1.005],
    [580.0, 0.1092, 0.7997],
    [600.0, 0.08070, 0.6390],
    [620.0, 0.06012, 0.5123],
    [640.0, 0.04519, 0.4121],
    [660.0, 0.03430, 0.3325],
    [680.0, 0.02632, 0.2691],
    [700.0, 0.02043, 0.2185],
    [720.0, 0.01607, 0.1779],
    [740.0, 0.01281, 0.1452],
    [760.0, 0.01036, 0.1190],
    [780.0, 0.008496, 0.09776],
    [800.0, 0.007069, 0.08059],
    [840.0, 0.004680, 0.05741],
    [880.0, 0.003200, 0.04210],
    [920.0, 0.002210, 0.03130],
    [960.0, 0.001560, 0.02360],
    [1000.0, 0.001150, 0.01810],
])

_HP_ALT_KM = _HP_TABLE[:, 0]
_HP_MIN = _HP_TABLE[:, 1] * 1e-12  # kg/m^3
_HP_MAX = _HP_TABLE[:, 2] * 1e-12

ALTITUDE_FLOOR_M = 100e3
ALTITUDE_CEILING_M = 1000e3

# Diurnal bulge: apex lags the subsolar point by 30 deg of Earth rotation;
# fixed cosine exponent (no inclination-dependent switch).
BULGE_LAG_RAD = math.radians(30.0)
BULGE_EXPONENT = 3.0


def _apex_direction(sun_direction: np.ndarray) -> np.ndarray:
    u = np.asarray(sun_direction, dtype=float)
    u = u / np.linalg.norm(u)
    c, s = math.cos(BULGE_LAG_RAD), math.sin(BULGE_LAG_RAD)
    return np.array([c * u[0] - s * u[1], s * u[0] + c * u[1], u[2]])


def _interp_profile(alt_km: np.ndarray, profile: np.ndarray) -> np.ndarray:
    idx = np.clip(np.searchsorted(_HP_ALT_KM, alt_km, side="right") - 1, 0, len(_HP_ALT_KM) - 2)
    h0 = _HP_ALT_KM[idx]
    h1 = _HP_ALT_KM[idx + 1]
    r0 = profile[idx]
    r1 = profile[idx + 1]
    scale_height = (h1 - h0) / np.log(r1 / r0)
    return r0 * np.exp((alt_km - h0) / scale_height)


def harris_priester_density(r_ecef: np.ndarray, sun_direction: np.ndarray):
    """Atmospheric density [kg/m^3] at Earth-fixed position(s) ``r_ecef``.

    ``sun_direction`` is the direction to the Sun expressed in the same
    frame as ``r_ecef``.  Accepts a single position (3,) or a batch (N, 3).

    Raises:
        ValueError: if any altitude falls outside the 100-1000 km table.
    """
    r = np.asarray(r_ecef, dtype=float)
    single = r.ndim == 1
    r = np.atleast_2d(r)

    alt_m = geodetic_altitude(r)
    if np.any(alt_m < ALTITUDE_FLOOR_M) or np.any(alt_m > ALTITUDE_CEILING_M):
        bad = float(np.min(alt_m)) if np.any(alt_m < ALTITUDE_FLOOR_M) else float(np.max(alt_m))
        raise ValueError(
            f"altitude {bad / 1e3:.1f} km outside Harris-Priester table range "
            f"[{ALTITUDE_FLOOR_M / 1e3:.0f}, {ALTITUDE_CEILING_M / 1e3:.0f}] km"
        )
    alt_km = alt_m / 1e3

    rho_min = _interp_profile(alt_km, _HP_MIN)
    rho_max = _interp_profile(alt_km, _HP_MAX)

    apex = _apex_direction(sun_direction)
    r_hat = r / np.linalg.norm(r, axis=-1, keepdims=True)
    cos_psi = np.clip(r_hat @ apex, -1.0, 1.0)
    bulge = np.maximum(0.5 * (1.0 + cos_psi), 0.0) ** (BULGE_EXPONENT / 2.0)

    rho = rho_min + (rho_max - rho_min) * bulge
    return float(rho[0]) if single else rho
