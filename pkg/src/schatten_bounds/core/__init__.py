from .contracts import WeightSource
from .errors import (
    DomainError,
    InputError,
    LayoutError,
    ParseError,
    PropertyViolation,
    SchattenBoundsError,
)

__all__ = [
    "WeightSource",
    "SchattenBoundsError",
    "InputError",
    "DomainError",
    "ParseError",
    "LayoutError",
    "PropertyViolation",
]
