"""Physical and geodetic constants shared across the package.

All values are SI (metres, seconds, kilograms, radians) unless noted.
"""

# Earth gravitational parameter [m^3/s^2]
GM_EARTH = 3.986004415e14

# WGS-84 ellipsoid
R_EARTH_EQ = 6378137.0
WGS84_FLATTENING = 1.0 / 298.257223563
WGS84_E2 = WGS84_FLATTENING * (2.0 - WGS84_FLATTENING)
R_EARTH_POLAR = R_EARTH_EQ * (1.0 - WGS84_FLATTENING)

# Earth rotation: single z-axis rotation model theta(t) = THETA_J2000 + OMEGA_EARTH * t
# with t in seconds past the J2000 reference epoch.
OMEGA_EARTH = 7.292115146706979e-5
# Earth rotation angle at J2000 (0.7790572732640 revolutions).
THETA_J2000 = 4.894961212735793

# Third bodies
GM_SUN = 1.32712440018e20
GM_MOON = 4.902800066e12
R_SUN = 6.957e8

# Radiation / relativity
AU = 1.495978707e11
SPEED_OF_LIGHT = 299792458.0
# Solar radiation pressure at 1 AU [N/m^2]
P_SRP_1AU = 4.56e-6

# Obliquity of the ecliptic at J2000 [rad]
OBLIQUITY_J2000 = 0.40909280422232897

SECONDS_PER_DAY = 86400.0
