from dataclasses import dataclass, field
from importlib.metadata import PackageNotFoundError, version

import click

from ..core.contracts import WeightSource
from .config import AnalysisSettings
from .constants import DISTRIBUTION_NAME


def tool_version() -> str:
    """Installed distribution version, or ``0+unknown`` from a source tree."""
    try:
        return version(DISTRIBUTION_NAME)
    except PackageNotFoundError:
        return "0+unknown"


@dataclass
class AppContext:
    """Invocation-scoped context for the CLI.

    Attributes:
        settings: Fully resolved configuration (flags, environment, config
            file, defaults), built once by the group callback.
        sources: Weight sources opened by the running command, closed when
            the command finishes.
        version: Tool version recorded in report provenance.
    """

    settings: AnalysisSettings = field(default_factory=AnalysisSettings)
    sources: list[WeightSource] = field(default_factory=list)
    version: str = field(default_factory=tool_version)

    def close(self) -> None:
        for source in self.sources:
            source.close()
        self.sources.clear()


def get_app_context(ctx: click.Context) -> AppContext:
    """Return the AppContext stored by the group callback."""
    app = ctx.find_object(AppContext)
    if app is None:
        raise RuntimeError(
            "AppContext not initialized. "
            "The CLI group must populate ctx.obj before commands run."
        )
    return app
