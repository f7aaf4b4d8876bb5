"""Capacity upper bounds for binary repeat channels via dual-feasible output laws."""

from ._backend import BACKEND
from .tolerances import Tolerances

__version__ = "0.1.0"

__all__ = ["BACKEND", "Tolerances", "__version__"]
