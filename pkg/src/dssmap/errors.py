"""Exception taxonomy shared across the package.

The CLI maps these onto distinct exit codes, so keep the hierarchy flat and
the categories coarse: parameter domain, input structure, degenerate design,
numerical failure, run configuration.
"""


class DssError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(DssError, ValueError):
    """A hyperparameter or function argument is outside its math domain."""


class StructuralError(DssError, ValueError):
    """Inputs are malformed: shape mismatch, non-finite entries, bad files."""


class DesignError(DssError, ValueError):
    """A regressor value makes the requested operation degenerate (x = 0)."""


class NumericalError(DssError, ArithmeticError):
    """An optimizer or update became numerically degenerate or diverged."""

    def __init__(self, message: str, coordinate: tuple | None = None):
        super().__init__(message)
        self.coordinate = coordinate


class ConfigurationError(DssError, ValueError):
    """An experiment or CLI configuration is invalid or infeasible."""
