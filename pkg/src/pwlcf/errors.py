"""Exception and warning types shared across the package."""


class PwlcfError(Exception):
    """Base class for all package errors."""


class DomainError(PwlcfError, ValueError):
    """A model-level precondition is not met."""


class InputError(PwlcfError):
    """A data or configuration file cannot be used."""


class AboveFreeSpeedError(DomainError):
    """Requested velocity is at or above the free-flow plateau of the law."""


class BelowMinimumError(DomainError):
    """Requested velocity is below the law's value at zero spacing."""


class NoLeaderError(DomainError):
    """The car has no leader to anticipate (head of an open road)."""


class TooShortError(DomainError):
    """The trajectory has too few steps for the requested statistic."""


class EmptyProblemError(DomainError):
    """A segmentation problem holds no samples."""


class TooManyBinsError(DomainError):
    """Exhaustive enumeration was requested on too many bins."""


class NonRepresentableShapeError(DomainError):
    """A piecewise fit cannot be written as max{lower, min{upper}}."""


class ParseError(InputError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MissingColumnError(InputError):
    pass


class NonMonotoneTimeError(InputError):
    pass


class NegativeSpacingWarning(UserWarning):
    """The law was evaluated at a negative spacing."""


class UnstableLawWarning(UserWarning):
    """Some slope lies outside [0, 1]; monotonicity of the dynamics is lost."""


class OrderingViolationWarning(UserWarning):
    """A simulation produced a negative spacing (cars passed each other)."""


class SlopeClampedWarning(UserWarning):
    """A fitted slope was clamped into [0, 1]."""
