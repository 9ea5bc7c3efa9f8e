"""Exception hierarchy shared by the solver modules and the CLI."""


class SirTreeError(Exception):
    """Base class for all errors raised by sirtree."""


class ParameterError(SirTreeError, ValueError):
    """Invalid model parameters, grid sizes or function arguments."""


class DimensionError(SirTreeError, ValueError):
    """State arrays do not match the grid they claim to live on."""


class NumericalAbort(SirTreeError, RuntimeError):
    """A computation was stopped because its numerical output cannot be trusted."""


class StabilityError(NumericalAbort):
    """The explicit integrator was asked to run past its stability bound or blew up."""


class ConvergenceError(NumericalAbort):
    """An iterative solve did not reach its tolerance within its budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class MonotonicityError(NumericalAbort):
    """A monotone march moved in the wrong direction beyond round-off."""


class InvalidRunError(SirTreeError):
    """A simulation cannot support the requested measurement."""


class MarginError(InvalidRunError):
    """The front came too close to the truncation boundary."""


class ClassificationError(SirTreeError):
    """The tail of a stationary profile could not be classified unambiguously."""


class ConfigError(SirTreeError, ValueError):
    """A run configuration could not be parsed or is inconsistent."""
