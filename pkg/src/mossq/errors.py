"""Exception hierarchy shared by all mossq modules."""


class MossqError(Exception):
    """Base class for all toolkit errors."""


class InvalidShapeError(MossqError, ValueError):
    """Shape is empty, has a non-positive dimension, or operands disagree."""


class InvalidValueError(MossqError, ValueError):
    """A value violates a numeric precondition (NaN/Inf input, r <= 0, ...)."""


class InvalidArgumentError(MossqError, ValueError):
    """An argument is out of its allowed domain (group_size < 1, bad enum, ...)."""


class E8m0RangeError(MossqError, ValueError):
    """A positive value cannot be represented as a power of two in [2^-127, 2^127]."""


class UndefinedModelError(MossqError, ValueError):
    """A closed-form SNR model is undefined for degenerate (all-zero) input."""


class FormatError(MossqError):
    """Base class for tensor-file parsing errors."""


class BadMagicError(FormatError):
    """File does not start with the expected magic tag."""


class VersionMismatchError(FormatError):
    """File carries an unsupported format version."""


class TruncatedPayloadError(FormatError):
    """File payload is shorter than the header promises."""


class TrainDivergedError(MossqError):
    """Training loss exceeded the divergence threshold."""
