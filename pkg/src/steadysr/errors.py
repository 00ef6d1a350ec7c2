"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ValidationError -> 1,
CapabilityError -> 2, NumericalError -> 3.
"""


class SteadySRError(Exception):
    """Base class for all package errors."""


class ValidationError(SteadySRError, ValueError):
    """Invalid parameter, configuration key, or argument."""


class CapabilityError(SteadySRError):
    """Request exceeds a configured size cap (e.g. Hilbert-space dimension)."""


class NumericalError(SteadySRError):
    """A solver failed to meet its accuracy or convergence contract."""


class DegenerateSteadyStateError(NumericalError):
    """The steady state is not unique (null space dimension > 1)."""
