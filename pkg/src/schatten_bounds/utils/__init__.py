"""
schatten-bounds Utilities

This module contains constants, configuration, context and the ordered
parallel map.
"""

# Constants
from .constants import (
    ALLOWED_ACTIVATIONS,
    ALLOWED_SUITES,
    DEFAULT_LOG_LEVEL,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    EXIT_INPUT_ERROR,
    EXIT_OK,
    EXIT_PROPERTY_VIOLATION,
    EXIT_USAGE,
    PACKAGE_LOGGER_NAME,
    REPORT_SCHEMA_VERSION,
)

# Parallel utilities
from .parallel import default_workers, ordered_map

# Note: config and context import the analysis package and are imported
# directly (``from schatten_bounds.utils.config import ...``) to keep the
# import graph acyclic. Individual modules create their own hierarchical
# loggers using:
# logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.module.name")

__all__ = [
    # Constants
    "PACKAGE_LOGGER_NAME",
    "REPORT_SCHEMA_VERSION",
    "DEFAULT_LOG_LEVEL",
    "DEFAULT_SEED",
    "DEFAULT_TRIALS",
    "ALLOWED_ACTIVATIONS",
    "ALLOWED_SUITES",
    "EXIT_OK",
    "EXIT_PROPERTY_VIOLATION",
    "EXIT_INPUT_ERROR",
    "EXIT_USAGE",
    # Parallel
    "default_workers",
    "ordered_map",
]
