"""Exception hierarchy shared across the toolkit.

Exit-code mapping used by the CLI:
  ValidationError subclasses -> 1, IOFailure -> 2, NumericFailure -> 3.
"""


class ReshootError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(ReshootError):
    """Bad inputs: shapes, ranges, configs."""


class ShapeError(ValidationError):
    """Mismatched dimensions or sequence lengths."""


class InvalidDepthError(ValidationError):
    """Depth is non-finite or non-positive where a valid depth is required."""


class BehindCameraError(ValidationError):
    """Point has z <= 0 in camera space and cannot be projected."""


class ConfigError(ValidationError):
    """Unknown mode / invalid flag combination."""


class EmptyInputError(ValidationError):
    """An operation requiring at least one element received none."""


class UndefinedMetricError(ValidationError):
    """A metric was requested over an empty support (e.g. all-false mask)."""


class IOFailure(ReshootError):
    """File missing, malformed, or failed integrity checks."""


class IntegrityError(IOFailure):
    """Checksum mismatch against a manifest."""


class PlyParseError(IOFailure):
    """Malformed PLY; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericFailure(ReshootError):
    """Numerical/geometric failure: degenerate fits, misregistration."""


class RankError(NumericFailure):
    """Degenerate point configuration (collinear / too few points)."""


class RegistrationError(NumericFailure):
    """Chunk registration failed: bad anchors or gross residual."""
