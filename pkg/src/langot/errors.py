"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionError(ValueError):
    """Operands have incompatible or unsupported dimensions."""


class SizeError(ValueError):
    """A problem instance exceeds the supported size."""


class StabilityError(RuntimeError):
    """An explicit scheme would be unstable for the requested step size."""


class ConvergenceError(RuntimeError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NumericalError(RuntimeError):
    """An internally assembled quantity failed a numerical sanity check."""


class ConfigError(ValueError):
    """An experiment configuration is malformed or inconsistent."""
