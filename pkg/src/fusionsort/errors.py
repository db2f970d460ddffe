"""Exception hierarchy shared across the package."""


class FusionSortError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(FusionSortError):
    """Tensor extents incompatible with the requested operation."""


class NumericsError(FusionSortError):
    """Non-finite values, degenerate statistics, or invalid discretization."""


class ConfigError(FusionSortError):
    """Invalid network/training configuration or checkpoint mismatch."""


class LabelError(FusionSortError):
    """Label mask contains class indices outside the valid range."""


class FormatError(FusionSortError):
    """Malformed or truncated file. Carries the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset
