"""satsched: Earth-observation imaging schedules under orbit-prediction uncertainty.

Propagates spacecraft trajectories through a configurable perturbation
force model, finds imaging opportunity windows, characterizes how
orbit-determination error shifts those windows via Monte Carlo sampling,
plans collection schedules with three algorithms (longest-path graph
search, branch-and-bound over a binary program, and probability-aware
depth-limited forward search), and scores plans against sampled true
trajectories.
"""

__version__ = "0.1.0"

from .astro import Epoch, GeodeticPoint, StateVector

__all__ = ["Epoch", "GeodeticPoint", "StateVector", "__version__"]
