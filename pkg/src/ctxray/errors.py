"""Exception types shared across the toolkit."""


class CtxrayError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(CtxrayError):
    """A file does not conform to the expected on-disk layout.

    Carries ``offset`` (byte position of the offending field) when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class UnsupportedDatatypeError(FormatError):
    """Volume file uses a datatype code outside the supported subset."""

    def __init__(self, code, supported):
        super().__init__(
            f"unsupported datatype code {code}; supported codes: "
            + ", ".join(str(c) for c in sorted(supported))
        )
        self.code = code
        self.supported = tuple(sorted(supported))


class ArgumentError(CtxrayError, ValueError):
    """An argument violates an operation's preconditions."""


class DegenerateInputError(CtxrayError):
    """Input is structurally valid but carries no usable information."""


class DegenerateVolumeError(DegenerateInputError):
    """Volume contains no body voxels above the body threshold."""


class DegenerateGeometryError(DegenerateInputError):
    """A geometric measurement collapsed (e.g. zero thoracic width)."""


class DegenerateSampleError(DegenerateInputError):
    """Statistical sample has zero variance where variance is required."""


class MissingDependencyError(CtxrayError):
    """A required mask class is absent or empty."""

    def __init__(self, class_name):
        super().__init__(f"required mask class missing or empty: {class_name!r}")
        self.class_name = class_name


class ViewMismatchError(CtxrayError):
    """Operation received a mask set with the wrong view tag."""

    def __init__(self, expected, actual):
        super().__init__(f"expected {expected!r} view, got {actual!r}")
        self.expected = expected
        self.actual = actual


class EmptyMaskError(CtxrayError):
    """Operation requires a non-empty mask."""


class InsufficientLandmarksError(CtxrayError):
    """Too few landmark masks to fit a model (e.g. <2 vertebrae)."""


class InsufficientCohortError(CtxrayError):
    """Cohort statistics need at least two samples."""


class UndefinedMetricError(CtxrayError):
    """Metric is undefined for the given inputs (e.g. empty mask sets)."""


class NumericDomainError(CtxrayError):
    """Numerical input leaves the valid domain (e.g. non-PSD covariance)."""


class SpecError(CtxrayError):
    """A synthetic-phantom shape specification is inconsistent."""
