"""Exception hierarchy."""


class RivertrajError(Exception):
    """Base class for all package errors."""


class ProjectionError(RivertrajError, ValueError):
    """Coordinates outside the projection frame's validity region."""


class UndefinedBearingError(RivertrajError, ValueError):
    pass


class DegenerateStepError(RivertrajError, ValueError):
    """Two consecutive positions coincide, so the step has no course."""


class RangeError(RivertrajError, ValueError):
    """Hectometer outside the river axis range."""


class OffRiverError(RivertrajError, ValueError):
    pass


class CurvatureError(RivertrajError, ValueError):
    pass


class GenerationError(RivertrajError, ValueError):
    """Synthetic river or vessel spec cannot be realized."""


class LabelError(RivertrajError, ValueError):
    pass


class ShapeError(RivertrajError, ValueError):
    pass


class ConfigError(RivertrajError, ValueError):
    pass


class TrainingError(RivertrajError, RuntimeError):
    """Training diverged; ``diagnostics`` holds the state at failure."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ComparisonError(RivertrajError, ValueError):
    pass
