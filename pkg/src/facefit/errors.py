"""Exception types shared across the toolkit."""


class FacefitError(Exception):
    """Base class for all toolkit errors."""


class ParameterShapeError(FacefitError, ValueError):
    """A coefficient vector does not match the width of its basis block."""


class ShapeMismatchError(FacefitError, ValueError):
    """Two maps or buffers that must share dimensions do not."""


class NumericRangeError(FacefitError, ValueError):
    """A computation produced a non-finite or out-of-range value."""


class SaturationError(FacefitError, ValueError):
    """A log argument reached 0; the clamped value is attached.

    Callers that prefer silent clamping can catch this and use
    ``clamped_value``.
    """

    def __init__(self, message, clamped_value):
        super().__init__(message)
        self.clamped_value = clamped_value


class EmptyEdgeSetError(FacefitError, ValueError):
    """No pixel passed the edge threshold; no distance field exists."""


class EmptyCoordinateSetError(FacefitError, ValueError):
    """An empty coordinate set makes the effectiveness fraction undefined."""


class SchemaError(FacefitError, ValueError):
    """Unknown label or category name for the declared parsing schema."""


class EmptySurfaceError(FacefitError, ValueError):
    """No covered pixel is available to build or refine a surface."""


class UnconstrainedFitError(FacefitError, ValueError):
    """The active loss terms cannot constrain the fit (e.g. nothing visible)."""


class DegenerateEmbeddingError(FacefitError, ValueError):
    """An image embedding has zero norm and cannot be cosine-compared."""


class DomainError(FacefitError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""
