"""Exception types raised across the package."""


class RamanNliError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(RamanNliError, ValueError):
    """An argument is outside its admissible range."""


class InvalidPlanError(RamanNliError, ValueError):
    """A channel plan violates the non-overlap or power rules."""


class InvalidGridError(RamanNliError, ValueError):
    """A sampling grid is non-uniform, too coarse or aliased."""


class InvalidStateError(RamanNliError, ValueError):
    """An object is used in a state its operation does not accept."""


class InconsistentMeasurementError(RamanNliError, ValueError):
    """Measured inputs imply an unphysical derived quantity."""


class DegenerateInputError(RamanNliError, ValueError):
    """Input has no power or no support where some is required."""


class IncompleteInputError(RamanNliError, ValueError):
    """Required per-channel or per-pair data is missing."""


class CoverageError(RamanNliError, ValueError):
    """A profile or transfer function does not cover the requested band."""


class StiffnessError(RamanNliError, RuntimeError):
    """An ODE integration failed to reach the requested accuracy."""


class DivergenceError(RamanNliError, RuntimeError):
    """A split-step propagation produced non-finite samples."""


class ProtocolError(RamanNliError, RuntimeError):
    """Paired simulation runs do not share the required settings."""


class ConfigError(RamanNliError, ValueError):
    """A scenario file or override cannot be turned into a valid setup."""


class ConvergenceError(RamanNliError, RuntimeError):
    """A simulation did not meet its convergence criterion."""
