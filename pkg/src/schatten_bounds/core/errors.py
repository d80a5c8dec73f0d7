"""
Exception hierarchy shared by the library and the CLI.

Every error carries a stable ``kind`` string. The CLI writes it into the
machine-readable error record and maps it to an exit code:

- ``input`` / ``domain`` / ``parse`` / ``layout``: exit code 2
- ``property``: exit code 1
"""

from typing import Any


class SchattenBoundsError(Exception):
    """Base class for all errors raised by ``schatten_bounds``."""

    kind = "error"

    def __init__(self, message: str, reason: str | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.reason = reason

    def to_record(self) -> dict[str, Any]:
        """Return the error as a JSON-serializable record."""
        return {"kind": self.kind, "reason": self.reason, "message": self.message}


class InputError(SchattenBoundsError, ValueError):
    """Malformed input: non-finite entries, shape mismatch, bad indices."""

    kind = "input"


class DomainError(SchattenBoundsError, ValueError):
    """A parameter lies outside its mathematical domain."""

    kind = "domain"


class ParseError(SchattenBoundsError, ValueError):
    """A checkpoint file could not be decoded.

    ``reason`` is one of ``truncated_header``, ``header_too_long``,
    ``malformed_json``, ``unknown_dtype``, ``out_of_bounds``, ``overlap``,
    ``size_mismatch`` or ``bad_entry``.
    """

    kind = "parse"


class LayoutError(SchattenBoundsError, ValueError):
    """Tensor names or shapes do not form a consistent encoder layout."""

    kind = "layout"


class PropertyViolation(SchattenBoundsError, AssertionError):
    """A verification property failed; ``instance`` holds the replay data."""

    kind = "property"

    def __init__(
        self, message: str, property_name: str, instance: dict[str, Any]
    ) -> None:
        super().__init__(message, reason=property_name)
        self.property_name = property_name
        self.instance = instance

    def to_record(self) -> dict[str, Any]:
        record = super().to_record()
        record["instance"] = self.instance
        return record
