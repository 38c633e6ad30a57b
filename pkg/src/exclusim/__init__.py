"""Synchronous exclusion processes of hard-core particles on a ring."""
from .configuration import InitSpec, RingConfiguration, from_gaps, from_positions, generate
from .dynamics import Normalization, Trajectory, advance, evolve, step
from .errors import ExclusimError, SchemaError
from .velocity import VelocityModel, constant_model

__version__ = "0.1.0"

__all__ = [
    "ExclusimError",
    "InitSpec",
    "Normalization",
    "RingConfiguration",
    "SchemaError",
    "Trajectory",
    "VelocityModel",
    "advance",
    "constant_model",
    "evolve",
    "from_gaps",
    "from_positions",
    "generate",
    "step",
]
