"""Spherical-harmonic Earth gravity evaluated in the Earth-fixed frame.

The geopotential and its gradient are computed with the Cunningham
recursion, which is non-singular at the poles (required for polar orbits).
Coefficients are stored normalized on disk and unnormalized once at load
time; at the bundled maximum degree (20) the unnormalized values stay far
inside double range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from ..constants import GM_EARTH, R_EARTH_EQ

DEFAULT_COEFFICIENT_FILE = "earth_gravity_n20.txt"


def _unnormalization_factor(n: int, m: int) -> float:
    # N_nm = sqrt((2n+1) * (2 - delta_m0) * (n-m)! / (n+m)!)
    k = 2.0 if m > 0 else 1.0
    ratio = math.factorial(n - m) / math.factorial(n + m)
    return math.sqrt((2 * n + 1) * k * ratio)


@dataclass(frozen=True)
class GravityField:
    """Unnormalized coefficient tables plus reference radius and GM."""

    c: np.ndarray  # (max_degree+1, max_degree+1), c[n, m]
    s: np.ndarray
    radius: float = R_EARTH_EQ
    gm: float = GM_EARTH

    @property
    def max_degree(self) -> int:
        return self.c.shape[0] - 1

    @classmethod
    def from_text(cls, text: str, radius: float = R_EARTH_EQ, gm: float = GM_EARTH) -> "GravityField":
        """Parse plain-text rows "degree order C S" of normalized coefficients."""
        entries = []
        max_degree = 0
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            n, m = int(parts[0]), int(parts[1])
            if m > n:
                raise ValueError(f"coefficient order {m} exceeds degree {n}")
            entries.append((n, m, float(parts[2]), float(parts[3])))
            max_degree = max(max_degree, n)
        c = np.zeros((max_degree + 1, max_degree + 1))
        s = np.zeros((max_degree + 1, max_degree + 1))
        c[0, 0] = 1.0
        for n, m, cn, sn in entries:
            factor = _unnormalization_factor(n, m)
            c[n, m] = factor * cn
            s[n, m] = factor * sn
        return cls(c=c, s=s, radius=radius, gm=gm)

    @classmethod
    def load_bundled(cls) -> "GravityField":
        text = resources.files("satsched.dynamics").joinpath(
            f"data/{DEFAULT_COEFFICIENT_FILE}"
        ).read_text()
        return cls.from_text(text)

    def _check_degree_order(self, degree: int, order: int) -> None:
        if degree < 0 or order < 0:
            raise ValueError("degree and order must be non-negative")
        if order > degree:
            raise ValueError(f"order {order} exceeds degree {degree}")
        if degree > self.max_degree:
            raise ValueError(
                f"degree {degree} exceeds bundled maximum {self.max_degree}"
            )

    def _vw_tables(self, r_ecef: np.ndarray, n_max: int):
        """Cunningham V/W auxiliaries up to degree/order ``n_max``.

        ``r_ecef`` has shape (N, 3); returns arrays of shape
        (n_max+1, n_max+1, N).
        """
        x, y, z = r_ecef[:, 0], r_ecef[:, 1], r_ecef[:, 2]
        r2 = x * x + y * y + z * z
        xf = x * self.radius / r2
        yf = y * self.radius / r2
        zf = z * self.radius / r2
        rho = self.radius * self.radius / r2

        n_pts = r_ecef.shape[0]
        v = np.zeros((n_max + 1, n_max + 1, n_pts))
        w = np.zeros((n_max + 1, n_max + 1, n_pts))
        v[0, 0] = self.radius / np.sqrt(r2)

        for m in range(1, n_max + 1):
            v[m, m] = (2 * m - 1) * (xf * v[m - 1, m - 1] - yf * w[m - 1, m - 1])
            w[m, m] = (2 * m - 1) * (xf * w[m - 1, m - 1] + yf * v[m - 1, m - 1])
        for n in range(1, n_max + 1):
            ms = np.arange(0, n)
            a = ((2 * n - 1) / (n - ms))[:, None]
            v[n, :n] = a * zf * v[n - 1, :n]
            w[n, :n] = a * zf * w[n - 1, :n]
            if n >= 2:
                ms2 = np.arange(0, n - 1)
                b = ((n + ms2 - 1) / (n - ms2))[:, None]
                v[n, : n - 1] -= b * rho * v[n - 2, : n - 1]
                w[n, : n - 1] -= b * rho * w[n - 2, : n - 1]
        return v, w

    def acceleration_ecef(self, r_ecef: np.ndarray, degree: int, order: int) -> np.ndarray:
        """Gravitational acceleration [m/s^2] in the Earth-fixed frame.

        Accepts a single position (3,) or a batch (N, 3); the output shape
        matches the input.  Degree 0 reproduces the point-mass field.
        """
        self._check_degree_order(degree, order)
        r = np.asarray(r_ecef, dtype=float)
        single = r.ndim == 1
        r = np.atleast_2d(r)

        v, w = self._vw_tables(r, degree + 1)
        scale = self.gm / (self.radius * self.radius)

        ax = np.zeros(r.shape[0])
        ay = np.zeros(r.shape[0])
        az = np.zeros(r.shape[0])
        for n in range(0, degree + 1):
            m_hi = min(n, order)
            cn = self.c[n, : m_hi + 1]
            sn = self.s[n, : m_hi + 1]
            # m = 0 term
            ax += -cn[0] * v[n + 1, 1]
            ay += -cn[0] * w[n + 1, 1]
            az += -(n + 1) * cn[0] * v[n + 1, 0]
            if m_hi >= 1:
                ms = np.arange(1, m_hi + 1)
                cm = cn[1:, None]
                sm = sn[1:, None]
                fac = ((n - ms + 2) * (n - ms + 1))[:, None]
                vp = v[n + 1, 2 : m_hi + 2]
                wp = w[n + 1, 2 : m_hi + 2]
                vm = v[n + 1, 0:m_hi]
                wm = w[n + 1, 0:m_hi]
                ax += 0.5 * np.sum(
                    (-cm * vp - sm * wp) + fac * (cm * vm + sm * wm), axis=0
                )
                ay += 0.5 * np.sum(
                    (-cm * wp + sm * vp) + fac * (-cm * wm + sm * vm), axis=0
                )
                az += np.sum(
                    (n - ms + 1)[:, None] * (-cm * v[n + 1, 1 : m_hi + 1] - sm * w[n + 1, 1 : m_hi + 1]),
                    axis=0,
                )
        accel = scale * np.stack([ax, ay, az], axis=-1)
        return accel[0] if single else accel

    def potential_ecef(self, r_ecef: np.ndarray, degree: int, order: int) -> float | np.ndarray:
        """Geopotential [m^2/s^2] (positive convention, V = GM/r + ...)."""
        self._check_degree_order(degree, order)
        r = np.asarray(r_ecef, dtype=float)
        single = r.ndim == 1
        r = np.atleast_2d(r)

        v, w = self._vw_tables(r, degree)
        total = np.zeros(r.shape[0])
        for n in range(0, degree + 1):
            m_hi = min(n, order)
            cn = self.c[n, : m_hi + 1, None]
            sn = self.s[n, : m_hi + 1, None]
            total += np.sum(cn * v[n, : m_hi + 1] + sn * w[n, : m_hi + 1], axis=0)
        pot = (self.gm / self.radius) * total
        return float(pot[0]) if single else pot


_BUNDLED: GravityField | None = None


def bundled_field() -> GravityField:
    global _BUNDLED
    if _BUNDLED is None:
        _BUNDLED = GravityField.load_bundled()
    return _BUNDLED


def gravity_spherical_harmonic(r_ecef: np.ndarray, degree: int, order: int) -> np.ndarray:
    """Earth-fixed gravitational acceleration from the bundled field."""
    return bundled_field().acceleration_ecef(r_ecef, degree, order)


def gravity_potential(r_ecef: np.ndarray, degree: int, order: int) -> float | np.ndarray:
    """Geopotential of the bundled field; supports the gradient cross-check."""
    return bundled_field().potential_ecef(r_ecef, degree, order)
