"""Error taxonomy shared across the package.

Exit-code mapping used by the CLI: 0 success, 2 configuration error,
3 numeric failure, 4 assumption violation.
"""


class MarginflowError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ConfigError(MarginflowError):
    """Invalid configuration, schema violation, or dimension mismatch."""

    exit_code = 2


class NumericError(MarginflowError):
    """Numeric failure (non-finite update, stiffness collapse).

    Carries the last good optimizer state so callers can persist
    partial results.
    """

    exit_code = 3

    def __init__(self, message, last_state=None, checkpoints=None):
        super().__init__(message)
        self.last_state = last_state
        self.checkpoints = checkpoints


class AssumptionError(MarginflowError):
    """A modelling precondition does not hold (e.g. non-separable data)."""

    exit_code = 4


class DomainError(MarginflowError):
    """Argument outside the mathematical domain of an operation."""

    exit_code = 2
