"""Exception types shared across the package."""


class BigSoftmaxError(Exception):
    """Base class for all package-specific errors."""


class DataFormatError(BigSoftmaxError):
    """Malformed input data; carries the offending line number when known."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class EmptyDatasetError(BigSoftmaxError):
    """No examples survived parsing/preprocessing."""


class DomainError(BigSoftmaxError):
    """Argument outside the mathematical domain of the operation."""


class OverflowSignal(BigSoftmaxError):
    """An exponent exceeded the guarded-exp threshold.

    Carries the exponent so the caller can decide policy (abort the run,
    mark a step failed, ...) instead of silently producing inf.
    """

    def __init__(self, exponent, context=""):
        msg = f"exp({exponent!r}) would overflow"
        if context:
            msg += f" ({context})"
        super().__init__(msg)
        self.exponent = exponent


class BlowUpError(BigSoftmaxError):
    """Non-finite state or unrepresentable objective value."""


class SolverError(BigSoftmaxError):
    """A root-finder or inner solver failed to converge."""


class ConfigError(BigSoftmaxError):
    """Inconsistent or unsupported run configuration."""


class TuningError(BigSoftmaxError):
    """Every learning rate in the tuning grid failed."""

    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = failures or {}


class UnsupportedExtensionError(BigSoftmaxError):
    """A documented extension point that is not implemented."""
