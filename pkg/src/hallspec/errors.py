"""Exception hierarchy shared by all modules."""


class HallSpecError(Exception):
    """Base class for errors raised by the toolkit."""


class ConfigurationError(HallSpecError, ValueError):
    """Invalid grid, config file, or incompatible inputs."""


class DomainError(HallSpecError, ValueError):
    """A multiplier or operator is undefined on a frequency in use."""


class ParameterError(HallSpecError, ValueError):
    """An index or physical parameter is outside its admissible range."""


class NonConvergenceError(HallSpecError, RuntimeError):
    """An iterative solver diverged or stagnated.

    The partially filled report is attached as ``report`` so callers can
    serialize what was observed before giving up.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SynthesisError(HallSpecError, ValueError):
    """Force atoms cannot be realized on the requested grid."""


class ContractionPreconditionError(NonConvergenceError):
    """The data are too large for the contraction argument to apply."""
