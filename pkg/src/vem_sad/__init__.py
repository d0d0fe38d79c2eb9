"""Virtual element solver for coupled stress-assisted diffusion on polygonal meshes."""

from .errors import ConfigError, ConstitutiveError, ConvergenceError, MeshError, SolverError, VemError

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "ConstitutiveError",
    "ConvergenceError",
    "MeshError",
    "SolverError",
    "VemError",
]
