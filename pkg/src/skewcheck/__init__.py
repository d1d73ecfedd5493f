"""Numerical checks for totally skew embeddings of polynomial maps."""

__version__ = "0.1.0"

from .errors import BoundViolation, DomainError, ImmersionError, InputError, ResourceError
from .jets import PolyMap, SymMultiMap, derivative, jet
from .report import Report

__all__ = [
    "BoundViolation", "DomainError", "ImmersionError", "InputError", "ResourceError",
    "PolyMap", "SymMultiMap", "Report", "derivative", "jet", "__version__",
]
