"""Trajectory prediction for inland vessels on a river axis.

Course changes and step distances are predicted as classes by encoder-decoder
networks whose decoder can be primed with the upcoming river curvature.
"""

from .errors import RivertrajError
from .geometry import MotionStep, PlanarPosition, ProjectionFrame, cog_diff, reconstruct, steps_from_positions
from .kernels import BACKEND
from .pipeline import DiscretizationSpec, SequenceSample, build_samples, split
from .river import RiverAxis, RiverModel, build_curvature, context_window
from .synth import FleetSpec, SyntheticRiverSpec, VesselSpec, generate_fleet, generate_river, generate_trajectory

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DiscretizationSpec",
    "FleetSpec",
    "MotionStep",
    "PlanarPosition",
    "ProjectionFrame",
    "RiverAxis",
    "RiverModel",
    "RivertrajError",
    "SequenceSample",
    "SyntheticRiverSpec",
    "VesselSpec",
    "build_curvature",
    "build_samples",
    "cog_diff",
    "context_window",
    "generate_fleet",
    "generate_river",
    "generate_trajectory",
    "reconstruct",
    "split",
    "steps_from_positions",
]
