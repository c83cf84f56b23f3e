"""Blender-driven instability for families of twist maps and the restricted three-body problem."""

__version__ = "0.1.0"

from . import errors
from .arithmetic import (RotationNumber, continued_fraction, convergents,
                         diophantine_constant, orbit_density_radius)

__all__ = [
    "__version__",
    "errors",
    "RotationNumber",
    "continued_fraction",
    "convergents",
    "diophantine_constant",
    "orbit_density_radius",
]
