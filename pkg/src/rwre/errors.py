"""Exception types raised across the package."""


class RWREError(Exception):
    """Base class for package errors."""


class ModelError(RWREError, ValueError):
    """Malformed or inadmissible model specification."""


class SimulationCapError(RWREError, RuntimeError):
    """A safety cap (cycle length, support size) was exceeded."""


class DirectionError(RWREError, ValueError):
    """Bad input to, or failure of, the integer-direction construction."""


class EstimatorError(RWREError, ValueError):
    """Invalid estimator input (e.g. a nonpositive value in an exponent fit)."""


class ConfigError(RWREError, ValueError):
    """Experiment configuration could not be parsed or validated."""
