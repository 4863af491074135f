"""Exception hierarchy shared by all physbench modules."""


class PhysBenchError(Exception):
    """Base class for every error raised by physbench."""


class DimensionError(PhysBenchError, ValueError):
    pass


class DivergenceError(PhysBenchError):
    """A state or derivative became non-finite during time stepping."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class SolverError(PhysBenchError):
    """Newton iteration for an implicit step did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnsupportedError(PhysBenchError):
    pass


class SingularityError(PhysBenchError):
    """Two spring endpoints coincide, so the spring direction is undefined."""


class SamplingExhaustedError(PhysBenchError):
    pass


class IllConditionedError(PhysBenchError):
    pass


class BundleError(PhysBenchError):
    """Base for dataset read/write failures."""


class MissingFileError(BundleError, FileNotFoundError):
    pass


class MalformedHeaderError(BundleError):
    pass


class DanglingReferenceError(BundleError):
    pass


class ChannelMismatchError(BundleError):
    """A stored record's shape or dtype disagrees with the channel table."""


class BundleValidationError(BundleError):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


class IngestError(BundleError):
    pass


class RunConfigError(PhysBenchError):
    """A run description or experiment spec is invalid."""
