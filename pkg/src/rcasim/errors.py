"""Exception types raised across the package.

Each family maps to a distinct process exit code in the command-line tool.
"""


class RCAError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class DomainError(RCAError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    exit_code = 2


class ConfigError(RCAError, ValueError):
    """Invalid scenario or optimizer configuration."""

    exit_code = 2


class SpacingError(RCAError, ValueError):
    """Two ports are closer than the model or layout allows."""

    exit_code = 6

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class ConditioningError(RCAError, ArithmeticError):
    """A linear system is singular or too ill-conditioned to solve."""

    exit_code = 3


class ProjectionError(RCAError):
    """Feasibility projection did not converge."""

    exit_code = 4


class QuantizationError(ProjectionError):
    """Snapped positions could not be made feasible."""


class PlanningError(RCAError):
    """A collision-free movement schedule could not be found."""

    exit_code = 5
