"""Exception types shared across the package."""


class SmpdeError(Exception):
    """Base class for all package errors."""


class GridError(SmpdeError):
    """Invalid grid specification or grid mismatch between operands."""


class AlignmentError(SmpdeError):
    """Interval or integrand endpoints do not line up with grid cells."""


class MeasureError(SmpdeError):
    """Invalid measure parameters or a sampler failure."""


class CoefficientError(SmpdeError):
    """Declared coefficient bounds fail their construction spot check."""


class DegenerateInputError(SmpdeError):
    """Input carries no usable signal (e.g. constant path in a scaling fit)."""


class ConvergenceError(SmpdeError):
    """Fixed-point iteration did not converge.

    Carries the successive-distance trace for post-mortem inspection.
    """

    def __init__(self, message, distances=None):
        super().__init__(message)
        self.distances = list(distances) if distances is not None else []


class AveragingError(SmpdeError):
    """Time-averaging is undefined or a boundedness assumption fails."""


class ConfigError(SmpdeError):
    """Experiment configuration failed validation.

    ``location`` is a ``"file:line"`` string when the offending key could be
    traced back to the config source.
    """

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location

    def __str__(self):
        base = super().__str__()
        return f"{self.location}: {base}" if self.location else base
