"""Gait phase, stair slope and locomotion mode estimation from a shank IMU."""

from .errors import GaitPhaseError

__version__ = "0.1.0"

__all__ = ["GaitPhaseError", "__version__"]
