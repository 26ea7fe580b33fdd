"""Exception hierarchy shared across the toolkit.

FormatError covers malformed files (bad magic, truncated payloads,
unsupported encodings) and maps to CLI exit code 2; every other toolkit
error maps to exit code 1.
"""


class SwdstyleError(Exception):
    """Base class for all toolkit errors."""


class FormatError(SwdstyleError):
    """A file does not conform to one of the supported on-disk formats."""


class DimensionError(SwdstyleError):
    """Shapes or channel counts of two operands do not line up."""


class MaskError(SwdstyleError):
    """Region labels are inconsistent between the two sides of a loss."""


class ViewError(SwdstyleError):
    """A multi-view collection is malformed (duplicate ids, missing depths)."""


class EngineError(SwdstyleError):
    """The optimization loop hit a non-recoverable state (e.g. NaN loss)."""
