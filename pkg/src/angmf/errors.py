"""Exception types shared across the package."""


class AngmfError(Exception):
    """Base class for every error raised by this package."""


class DegenerateVector(AngmfError):
    """A vector that cannot serve as a direction (zero norm or drifted off the sphere)."""


class DomainError(AngmfError):
    """A scalar argument lies outside its mathematical domain."""


class EmptyBatch(AngmfError):
    """A batch reduction was requested over zero valid entries."""


class EmptyInput(AngmfError):
    """A metric was requested over an empty sample set."""


class ShapeError(AngmfError):
    """Array arguments have incompatible shapes."""


class DegenerateResultant(AngmfError):
    """Sample directions cancel out, so the mean direction is undefined."""


class InsufficientPixels(AngmfError):
    """Fewer valid pixels are available than the requested selection size."""


class NormalizationError(AngmfError):
    """A direction head produced a vector too short to normalize."""


class NumericalError(AngmfError):
    """A numerical routine diverged."""


class FormatError(AngmfError):
    """A binary or CSV payload is malformed.

    ``offset`` is the byte position at which parsing failed.
    """

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
