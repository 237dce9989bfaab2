"""Exception types shared across the package."""


class OtMarginError(Exception):
    """Base class for every error raised by this package."""


class NonFiniteCostError(OtMarginError):
    """A cost matrix contains NaN or infinite entries."""


class DegenerateMarginalsError(OtMarginError):
    """Marginal weights are non-positive or the two sides carry different mass."""


class ShapeMismatchError(OtMarginError):
    """Array shapes are inconsistent with each other."""


class TooLargeError(OtMarginError):
    """The instance exceeds the size limit of the brute-force oracle."""


class ZeroVectorError(OtMarginError):
    """A vector with (near-)zero norm was passed where a direction is required."""


class GammaOutOfRangeError(OtMarginError):
    """The similarity/reward blend weight is outside [0, 1]."""


class DimensionMismatchError(OtMarginError):
    """Feature dimensions disagree with the model or across records."""


class EmptyDatasetError(OtMarginError):
    """An operation requires at least one preference pair."""


class BatchTooLargeError(OtMarginError):
    """Requested batch size exceeds the dataset size."""


class InvalidConfigError(OtMarginError):
    """A configuration value violates its documented constraints."""


class ParseError(OtMarginError):
    """A persisted record could not be parsed; the message names the line."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message)
        self.line = line


class InvalidNError(OtMarginError):
    """A candidate count must be a positive integer."""


class NotEnoughCandidatesError(OtMarginError):
    """A candidate set is smaller than the largest requested selection size."""
