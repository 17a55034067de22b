"""Viscous compressible gas ball with a free surface, in mass coordinates."""

__version__ = "0.1.0"

from ._backend import BACKEND
from .model import ForcingSpec, ModelParams, validate_params
from .stationary import StationaryProfile, fixed_point_solve, shoot
from .dynamics import DiscreteState, InitialData, SimConfig, simulate

__all__ = ["BACKEND", "ForcingSpec", "ModelParams", "validate_params", "StationaryProfile",
           "fixed_point_solve", "shoot", "DiscreteState", "InitialData", "SimConfig", "simulate"]
