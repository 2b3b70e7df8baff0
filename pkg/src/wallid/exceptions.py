"""Exception hierarchy.

The CLI maps these onto process exit codes: configuration problems exit
with 2, numerical failures with 3 and estimation failures with 4.
"""


class WallIDError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(WallIDError, ValueError):
    """Invalid configuration, input file or cross-field inconsistency."""

    exit_code = 2


class DomainError(ConfigError):
    """A coordinate lies outside the wall."""


class InvalidParameterError(WallIDError, ValueError):
    """A parameter vector yields a non-physical conductivity."""

    exit_code = 3


class CoverageError(ConfigError):
    """Requested window is not covered by the available data."""


class NumericalError(WallIDError, ArithmeticError):
    """Numerical failure of the forward or sensitivity solver."""

    exit_code = 3


class DivergenceError(NumericalError):
    """The explicit time march blew up."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class EstimationError(WallIDError):
    """Parameter estimation could not produce a valid result."""

    exit_code = 4
