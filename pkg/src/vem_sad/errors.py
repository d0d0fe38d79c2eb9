"""Exception hierarchy; ``category`` is what the CLI reports."""


class VemError(Exception):
    category = "error"
    exit_code = 1


class MeshError(VemError):
    category = "mesh"
    exit_code = 2


class ConstitutiveError(VemError):
    """A coefficient law left its admissible range (e.g. non-SPD diffusion tensor)."""

    category = "constitutive"
    exit_code = 3


class SolverError(VemError):
    category = "solver"
    exit_code = 4


class ConvergenceError(VemError):
    """Picard iteration hit ``max_iter``; ``history`` holds the update norms."""

    category = "convergence"
    exit_code = 5

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class ConfigError(VemError):
    category = "config"
    exit_code = 6
