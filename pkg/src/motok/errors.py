"""Error taxonomy shared across the toolkit.

Each class maps to a distinct CLI exit code (see EXIT_CODES).
"""


class MotokError(Exception):
    """Base class for all toolkit errors."""


class InvalidInputError(MotokError, ValueError):
    """Caller-supplied data violates a precondition (shape, range, count)."""


class NormalizationError(MotokError, ValueError):
    """Rotation input too degenerate to orthonormalize."""


class UnsupportedLayoutError(MotokError, ValueError):
    """Motion feature layout tag is unknown or not handled by the operation."""


class UnsupportedOrderingError(MotokError, ValueError):
    """Token ordering cannot be used for the requested operation."""


class CorruptInputError(MotokError, ValueError):
    """Binary artifact (container, codebook, grid) failed structural checks."""


class CorruptStreamError(CorruptInputError):
    """Token stream malformed; carries the offending position."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class TrainingDivergedError(MotokError, RuntimeError):
    """Loss became non-finite; carries the epoch index."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class NumericalFailureError(MotokError, RuntimeError):
    """A numerical routine left its supported regime (e.g. covariance too indefinite)."""


class InvalidStateError(MotokError, RuntimeError):
    """Operation requires state (usage data, fitted model) that is absent."""


# Exit code per error class, documented in the README. 0 = success, 1 = unexpected.
EXIT_CODES = {
    InvalidInputError: 2,
    NormalizationError: 2,
    UnsupportedLayoutError: 3,
    UnsupportedOrderingError: 3,
    CorruptStreamError: 4,
    CorruptInputError: 4,
    TrainingDivergedError: 5,
    NumericalFailureError: 6,
    InvalidStateError: 7,
}


def exit_code_for(exc: BaseException) -> int:
    for cls in type(exc).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    if isinstance(exc, OSError):
        return 8
    return 1
