"""Simulation lab for random walks in random environments with a forbidden direction."""

__version__ = "0.1.0"

from .env import Environment, ModelSpec, StepLaw, ValidationReport, validate_model
from .errors import ConfigError, DirectionError, EstimatorError, ModelError, RWREError, SimulationCapError
from .models import preset

__all__ = [
    "ConfigError",
    "DirectionError",
    "Environment",
    "EstimatorError",
    "ModelError",
    "ModelSpec",
    "RWREError",
    "SimulationCapError",
    "StepLaw",
    "ValidationReport",
    "__version__",
    "preset",
    "validate_model",
]
