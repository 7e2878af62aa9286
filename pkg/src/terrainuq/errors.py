"""Exception hierarchy shared by the solver, the surrogate code and the CLI."""


class TerrainUQError(Exception):
    """Base class for all errors raised by terrainuq."""


class ConfigurationError(TerrainUQError, ValueError):
    """Invalid or inconsistent user input (maps to CLI exit code 2)."""


class SimulationError(TerrainUQError, RuntimeError):
    """The propagation model cannot be evaluated for the given geometry."""


class NumericalFailure(SimulationError):
    """Non-finite values appeared while marching the field."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class RankDeficiencyError(TerrainUQError, ValueError):
    """Regression matrix does not have full column rank."""

    def __init__(self, message, n_deficient):
        super().__init__(message)
        self.n_deficient = n_deficient


class IllPosedLOOError(TerrainUQError, ValueError):
    """A hat-matrix diagonal entry is numerically one, so LOO residuals blow up."""


class ExtensionExhausted(TerrainUQError):
    """The adaptive candidate set ran empty."""


class PartialSampleFailure(TerrainUQError):
    """Some forward-model evaluations of a sample design failed."""

    def __init__(self, message, failed_indices):
        super().__init__(message)
        self.failed_indices = list(failed_indices)
