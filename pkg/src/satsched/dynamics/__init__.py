"""Force models and numerical trajectory propagation."""

from .atmosphere import harris_priester_density
from .forces import (
    ForceModelConfig,
    ReentryError,
    SpacecraftParams,
    acceleration,
    conical_shadow_factor,
    relativistic_correction,
    srp_acceleration,
    third_body_acceleration,
)
from .gravity import GravityField, bundled_field, gravity_potential, gravity_spherical_harmonic
from .propagation import (
    Trajectory,
    propagate_rk4,
    propagate_rk4_batch,
    trajectory_from_csv,
    trajectory_to_csv,
)

__all__ = [
    "ForceModelConfig",
    "GravityField",
    "ReentryError",
    "SpacecraftParams",
    "Trajectory",
    "acceleration",
    "bundled_field",
    "conical_shadow_factor",
    "gravity_potential",
    "gravity_spherical_harmonic",
    "harris_priester_density",
    "propagate_rk4",
    "propagate_rk4_batch",
    "relativistic_correction",
    "srp_acceleration",
    "third_body_acceleration",
    "trajectory_from_csv",
    "trajectory_to_csv",
]
