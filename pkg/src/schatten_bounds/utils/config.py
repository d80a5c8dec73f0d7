import json
import logging
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..analysis.bounds import BoundConfig
from ..analysis.model import get_activation
from ..core.errors import InputError
from .constants import (
    ALLOWED_SUITES,
    DEFAULT_ACTIVATION,
    DEFAULT_HEAD_DIM,
    DEFAULT_TENSOR_PREFIX,
    PACKAGE_LOGGER_NAME,
)

logger = logging.getLogger(f"{PACKAGE_LOGGER_NAME}.utils.config")

# Keys of BoundConfig that may be overridden from the command line
BOUND_KEYS = tuple(BoundConfig.model_fields)


class AnalysisSettings(BaseModel):
    """Fully resolved analysis configuration, echoed into every report."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    bound: BoundConfig = Field(default_factory=BoundConfig)
    rank_tol: float | None = Field(
        default=None,
        gt=0.0,
        lt=1.0,
        title="Rank tolerance",
        description="Relative rank cutoff; None uses max(rows, cols) * f32 eps",
    )
    grid_size: int | None = Field(
        default=None,
        ge=1,
        title="Grid size",
        description="Index grid resolution m; None uses ceil(L + log N)",
    )
    activation: Literal["relu", "gelu"] = Field(
        default=DEFAULT_ACTIVATION,  # type: ignore[assignment]
        title="Activation",
        description="Feedforward activation of the forward-pass oracle",
    )
    prefix: str = Field(
        default=DEFAULT_TENSOR_PREFIX,
        title="Tensor prefix",
        description="Name prefix of the encoder layers in checkpoint files",
    )
    head_dim: int = Field(
        default=DEFAULT_HEAD_DIM, ge=1, title="Head dimension", description="d_h"
    )
    workers: int | None = Field(
        default=None,
        ge=1,
        title="Workers",
        description="Threads for per-matrix work; None uses min(4, cpu count)",
    )

    def echo(self) -> dict[str, Any]:
        """JSON-ready form with every default spelled out."""
        return self.model_dump(mode="json")


def load_config_file(path: str | Path | None) -> dict[str, Any]:
    """Read a JSON config file into a plain mapping; ``None`` gives ``{}``."""
    if path is None:
        return {}
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        logger.error(f"Failed to read config file {path}: {e}")
        raise InputError(f"Cannot read config file {path}: {e}") from e
    try:
        data = json.loads(text)
    except ValueError as e:
        raise InputError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise InputError(f"Config file {path} must hold a JSON object")
    logger.debug(f"Loaded config file {path} with keys {sorted(data)}")
    return data


def resolve_settings(
    file_values: Mapping[str, Any] | None = None,
    overrides: Mapping[str, Any] | None = None,
) -> AnalysisSettings:
    """Merge defaults, config-file values and flag overrides.

    ``overrides`` holds CLI values (flags or their environment variables);
    ``None`` entries mean "not given" and fall through to the file. Bound
    scalars may appear flat in ``overrides`` or nested under ``bound`` in the
    file. Without an explicit ``act_lipschitz`` the activation's own constant
    is used.
    """
    merged: dict[str, Any] = dict(file_values or {})
    bound: dict[str, Any] = dict(merged.pop("bound", None) or {})
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in BOUND_KEYS:
            bound[key] = value
        else:
            merged[key] = value
    if "act_lipschitz" not in bound:
        bound["act_lipschitz"] = get_activation(
            merged.get("activation", DEFAULT_ACTIVATION)
        ).lipschitz
    try:
        return AnalysisSettings(bound=BoundConfig(**bound), **merged)
    except ValidationError as e:
        raise InputError(f"Invalid configuration: {e}") from e


def _parse_file(file_path: Path, valid_names: set[str]) -> set[str]:
    """Parse suite names from a file (one name per line)."""
    names: set[str] = set()
    invalid_count = 0
    try:
        with open(file_path) as f:
            for raw_line in f:
                name = raw_line.strip()
                if not name or name.startswith("#"):
                    continue
                if name in valid_names:
                    names.add(name)
                else:
                    invalid_count += 1
        if invalid_count > 0:
            logger.warning(
                f"Ignored {invalid_count} invalid suite name(s) from file: {file_path}"
            )
    except OSError as e:
        logger.warning(f"Failed to read suite names file {file_path}: {e}")
    return names


def _parse_comma_separated(value: str, valid_names: set[str]) -> set[str]:
    """Parse comma-separated suite names."""
    names: set[str] = set()
    invalid_count = 0
    for part in value.split(","):
        name = part.strip()
        if name:
            if name in valid_names:
                names.add(name)
            else:
                invalid_count += 1
    if invalid_count > 0:
        logger.warning(
            f"Ignored {invalid_count} invalid suite name(s) from comma-separated input"
        )
    return names


def parse_suite_names(
    suite_input: str | None,
    valid_names: set[str] | None = None,
) -> list[str]:
    """
    Parse verification suite names from a CLI argument or environment variable.

    Supported formats:
    1. ``all`` or empty: every suite
    2. Comma-separated string: "norms,parser"
    3. File path containing one suite name per line

    Returns:
        Valid suite names in registry order
    """
    valid = set(ALLOWED_SUITES) if valid_names is None else valid_names
    order = [name for name in ALLOWED_SUITES if name in valid]
    if not suite_input or suite_input.strip() == "all":
        return order

    value = suite_input.strip()
    potential_path = Path(value)
    if potential_path.exists() and potential_path.is_file():
        selected = _parse_file(potential_path, valid)
    else:
        selected = _parse_comma_separated(value, valid)
    return [name for name in order if name in selected]


def unknown_suite_names(suite_input: str | None) -> list[str]:
    """Requested suite names that are not in the registry, in input order."""
    if not suite_input or suite_input.strip() == "all":
        return []
    value = suite_input.strip()
    path = Path(value)
    if path.exists() and path.is_file():
        try:
            lines = path.read_text().splitlines()
        except OSError:
            return []
        requested = [line.strip() for line in lines]
        requested = [name for name in requested if not name.startswith("#")]
    else:
        requested = [part.strip() for part in value.split(",")]
    return [name for name in requested if name and name not in ALLOWED_SUITES]


def with_overrides(settings: AnalysisSettings, **overrides: Any) -> AnalysisSettings:
    """Copy of ``settings`` with the non-None command options applied."""
    values = {key: value for key, value in overrides.items() if value is not None}
    if not values:
        return settings
    try:
        return AnalysisSettings.model_validate({**settings.model_dump(), **values})
    except ValidationError as e:
        raise InputError(f"Invalid configuration: {e}") from e
