"""Exception types shared across the package."""


class HippocError(Exception):
    """Base class for every error raised by this package."""


class NonDyadicDenominator(HippocError):
    """A binary expansion was requested for a rational whose denominator is
    not a power of two."""


class OutOfRange(HippocError):
    """A value fell outside its required range (typically [0, 1))."""


class InsufficientPrecision(HippocError):
    """A sampling comparison could not be resolved within the known bits of
    the bias parameter, and the parameter cannot be extended."""


class ParseError(HippocError):
    """Malformed input data."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TruncatedHeader(HippocError):
    """A packed bit file is shorter than its header declares."""


class UnknownSource(HippocError):
    """An adversarial source name was not recognised."""


class PrefixTooShort(HippocError):
    """The supplied bit prefix is shorter than the evaluation requires."""

    def __init__(self, required: int, actual: int | None = None):
        msg = f"need at least {required} bits"
        if actual is not None:
            msg += f", got {actual}"
        super().__init__(msg)
        self.required = required
        self.actual = actual


class InvalidInterval(HippocError):
    """Threshold interval is empty or does not contain the parameter."""


class DegenerateP(HippocError):
    """The bias is 0 or 1, so the standard deviation is zero."""


class TooLarge(HippocError):
    """An exact computation was requested beyond its supported size."""


class ZeroTrials(HippocError):
    """A Monte Carlo estimate was requested with no trials."""


class NoPassingLevel(HippocError):
    """The pipeline found no level at which the checkpoint-coherence test
    passes within the available resolution."""
