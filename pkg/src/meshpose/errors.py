"""Exception hierarchy shared by all meshpose modules."""


class MeshposeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MeshposeError):
    """An input value violates a documented invariant."""


class FormatError(MeshposeError):
    """A file does not conform to one of the binary or text formats."""


class BadMagicError(FormatError):
    """File does not start with the expected magic bytes."""


class BadDimensionsError(FormatError):
    """Declared dimensions are zero, negative, or exceed the format limits."""


class TruncatedFileError(FormatError):
    """File ends before the declared payload is complete."""


class DegenerateProjectionError(MeshposeError):
    """A vertex is at or behind the camera plane and cannot be projected."""


class DataError(MeshposeError):
    """Runtime data is unusable (empty foreground, unreadable corpus, ...)."""
