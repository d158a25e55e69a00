"""Exception hierarchy shared across the package."""


class GlassDepthError(Exception):
    """Base class for all package errors."""


class ContractError(GlassDepthError, ValueError):
    """An argument violates an operation's precondition."""


class DimensionError(ContractError):
    """Array shapes are incompatible for the requested operation."""


class NumericError(GlassDepthError, ArithmeticError):
    """A computation produced a non-finite value."""


class EmptyCloudError(GlassDepthError):
    """A point cloud has no points left to process."""


class UndefinedLossError(GlassDepthError, ValueError):
    """A loss or metric has an empty support set."""


class FormatError(GlassDepthError, ValueError):
    """A file does not conform to its expected format.

    ``offset`` is the byte offset (or line number for text formats) where
    parsing failed, when known.
    """

    def __init__(self, message, offset=None, path=None):
        self.offset = offset
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if offset is not None:
            where.append(f"offset {offset}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class AnnotationError(GlassDepthError):
    """Scene annotation could not be completed."""


class GenerationError(GlassDepthError):
    """Procedural scene generation failed."""


class TrainingError(GlassDepthError):
    """Training aborted."""
