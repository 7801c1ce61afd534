"""Exception hierarchy shared by the solvers and the CLI.

Each class maps to a distinct process exit code (see cli.EXIT_CODES).
"""


class ConfigError(ValueError):
    """Malformed scenario document (schema-level problem)."""


class AssumptionError(ConfigError):
    """Scenario data violates an existence-theory hypothesis
    (positivity of initial densities, boundary compliance, matrix
    definiteness, gamma > 1, ...)."""


class PositivityError(RuntimeError):
    """A density dropped below the configured floor during a run."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class BlowUpError(RuntimeError):
    """Non-finite field values appeared (instability / blow-up)."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class IterationError(RuntimeError):
    """An implicit fixed-point iteration failed to converge."""
