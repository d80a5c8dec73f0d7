"""
schatten-bounds command-line interface
"""

import functools
import io
import logging
import sys
from collections.abc import Callable, Sequence
from typing import Any

import click
from pydantic import ValidationError

from providers.local import SyntheticSpecSource
from schatten_bounds.core.errors import (
    InputError,
    PropertyViolation,
    SchattenBoundsError,
)
from schatten_bounds.ingest.synth import SynthSpec, load_synth_spec
from schatten_bounds.pipeline import (
    load_theory_weights,
    open_sources,
    random_theory_instance,
    run_analysis,
    run_compare,
    run_norm_scaling,
    run_posthoc,
    run_regime_table,
    run_spectra,
    run_sweep_p,
    write_synth,
)
from schatten_bounds.reports import (
    COMPARE_COLUMNS,
    NORM_SCALING_COLUMNS,
    REGIME_COLUMNS,
    SPECTRA_COLUMNS,
    SWEEP_COLUMNS,
    dumps,
    error_record,
    plot_curves,
    write_csv,
    write_text,
)
from schatten_bounds.utils import (
    ALLOWED_ACTIVATIONS,
    ALLOWED_SUITES,
    DEFAULT_LOG_LEVEL,
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    EXIT_INPUT_ERROR,
    EXIT_PROPERTY_VIOLATION,
    EXIT_USAGE,
    PACKAGE_LOGGER_NAME,
    REPORT_SCHEMA_VERSION,
)
from schatten_bounds.utils.config import (
    load_config_file,
    parse_suite_names,
    resolve_settings,
    unknown_suite_names,
    with_overrides,
)
from schatten_bounds.utils.constants import DEFAULT_HEAD_DIM, DISTRIBUTION_NAME
from schatten_bounds.utils.context import AppContext, get_app_context
from schatten_bounds.verify import run_suites

# Configure logging
logging.basicConfig(
    level=getattr(logging, DEFAULT_LOG_LEVEL.upper()),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)

logger = logging.getLogger(PACKAGE_LOGGER_NAME)

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]


class SchattenGroup(click.Group):
    """Command group whose usage errors exit with code 64."""

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as e:
            e.exit_code = EXIT_USAGE
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_USAGE
            raise


def handle_errors(func: Callable[..., None]) -> Callable[..., None]:
    """Turn library errors into an error record on stdout and an exit code."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> None:
        try:
            func(*args, **kwargs)
        except PropertyViolation as e:
            logger.error(f"Property violation: {e}")
            click.echo(dumps(error_record(e)), nl=False)
            sys.exit(EXIT_PROPERTY_VIOLATION)
        except (SchattenBoundsError, OSError) as e:
            logger.error(f"{type(e).__name__}: {e}")
            click.echo(dumps(error_record(e)), nl=False)
            sys.exit(EXIT_INPUT_ERROR)

    return wrapper


def _emit(text: str, out: str | None) -> None:
    write_text(text, out, sys.stdout)


def _emit_csv(
    rows: Sequence[dict[str, Any]], columns: Sequence[str], out: str | None
) -> None:
    buffer = io.StringIO()
    write_csv(rows, columns, buffer)
    _emit(buffer.getvalue(), out)


out_option = click.option(
    "--out",
    type=click.Path(dir_okay=False),
    help="Write the report to this file instead of stdout.",
)
rank_tol_option = click.option(
    "--rank-tol",
    type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True),
    help="Relative rank cutoff (default max(rows, cols) * f32 epsilon).",
)
grid_option = click.option(
    "--grid",
    "grid_size",
    type=click.IntRange(min=1),
    help="Index grid resolution m (default ceil(L + log N)).",
)


@click.group(cls=SchattenGroup)
@click.option(
    "--config",
    "config_path",
    envvar="SCHATTEN_CONFIG",
    type=click.Path(dir_okay=False),
    help="JSON config file; flags and environment variables override it.",
)
@click.option(
    "--log-level",
    envvar="SCHATTEN_LOG_LEVEL",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    default=DEFAULT_LOG_LEVEL,
    help="Logging level (logs go to stderr).",
)
@click.option(
    "--workers",
    envvar="SCHATTEN_WORKERS",
    type=click.IntRange(min=1),
    help="Threads for per-matrix work (default min(4, cpu count)).",
)
@click.option(
    "--activation",
    envvar="SCHATTEN_ACTIVATION",
    type=click.Choice(ALLOWED_ACTIVATIONS),
    help="Feedforward activation; sets L_phi unless the config gives one.",
)
@click.option(
    "--prefix",
    envvar="SCHATTEN_TENSOR_PREFIX",
    help="Name prefix of the encoder layers (default 'encoder.layer').",
)
@click.option(
    "--head-dim",
    envvar="SCHATTEN_HEAD_DIM",
    type=click.IntRange(min=1),
    help=f"Per-head dimension d_h (default {DEFAULT_HEAD_DIM}).",
)
@click.option("--sample-size", "n", type=click.IntRange(min=3), help="Sample size n.")
@click.option(
    "--tokens", type=click.IntRange(min=1), help="Tokens per sequence T."
)
@click.option(
    "--delta",
    type=click.FloatRange(0.0, 1.0, min_open=True, max_open=True),
    help="Confidence parameter delta.",
)
@click.version_option(package_name=DISTRIBUTION_NAME)
@click.pass_context
def main(
    ctx,
    config_path,
    log_level,
    workers,
    activation,
    prefix,
    head_dim,
    n,
    tokens,
    delta,
):
    """Spectrum-adaptive generalization-bound proxies for transformer weights."""
    logging.getLogger().setLevel(getattr(logging, log_level.upper()))
    try:
        settings = resolve_settings(
            load_config_file(config_path),
            {
                "workers": workers,
                "activation": activation,
                "prefix": prefix,
                "head_dim": head_dim,
                "n": n,
                "T": tokens,
                "delta": delta,
            },
        )
    except InputError as e:
        logger.error(f"Invalid configuration: {e}")
        click.echo(dumps(error_record(e)), nl=False)
        sys.exit(EXIT_INPUT_ERROR)
    app = AppContext(settings=settings)
    ctx.obj = app
    ctx.call_on_close(app.close)


@main.command()
@click.argument("path", type=click.Path(dir_okay=False))
@out_option
@rank_tol_option
@grid_option
@click.pass_context
@handle_errors
def analyze(ctx, path, out, rank_tol, grid_size):
    """Analyze one checkpoint and print the JSON report."""
    app = get_app_context(ctx)
    settings = with_overrides(app.settings, rank_tol=rank_tol, grid_size=grid_size)
    app.sources = open_sources([path], settings)
    report = run_analysis(app.sources[0], settings, app.version)
    _emit(report.to_json(), out)


@main.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path(dir_okay=False))
@click.option(
    "--normalize/--raw",
    default=True,
    help="Plot values normalized to the base point (default) or raw values.",
)
@click.option("--plot", type=click.Path(dir_okay=False), help="Write an SVG chart.")
@click.option("--log-y", is_flag=True, help="Logarithmic y axis in the chart.")
@out_option
@rank_tol_option
@grid_option
@click.pass_context
@handle_errors
def compare(ctx, paths, normalize, plot, log_y, out, rank_tol, grid_size):
    """Compare B_ours and B_Edelman across checkpoints of a depth or width sweep."""
    app = get_app_context(ctx)
    settings = with_overrides(app.settings, rank_tol=rank_tol, grid_size=grid_size)
    app.sources = open_sources(paths, settings)
    result = run_compare(app.sources, settings)
    _emit_csv(result.rows, COMPARE_COLUMNS, out)
    if plot:
        kind = "normalized" if normalize else "raw"
        plot_curves(
            result.series(normalized=normalize),
            plot,
            x_label=result.axis,
            y_label=f"{kind} complexity",
            title=f"Complexity proxies vs {result.axis}",
            log_y=log_y,
        )


@main.command("sweep-p")
@click.argument("path", type=click.Path(dir_okay=False))
@out_option
@rank_tol_option
@grid_option
@click.pass_context
@handle_errors
def sweep_p(ctx, path, out, rank_tol, grid_size):
    """Per-matrix term(p) / term(0) over the index grid."""
    app = get_app_context(ctx)
    settings = with_overrides(app.settings, rank_tol=rank_tol)
    app.sources = open_sources([path], settings)
    _emit_csv(run_sweep_p(app.sources[0], settings, grid_size), SWEEP_COLUMNS, out)


@main.command()
@click.argument("path", type=click.Path(dir_okay=False))
@out_option
@rank_tol_option
@click.pass_context
@handle_errors
def spectra(ctx, path, out, rank_tol):
    """Singular values of every composed matrix."""
    app = get_app_context(ctx)
    settings = with_overrides(app.settings, rank_tol=rank_tol)
    app.sources = open_sources([path], settings)
    _emit_csv(run_spectra(app.sources[0], settings), SPECTRA_COLUMNS, out)


@main.command("norm-scaling")
@click.argument("paths", nargs=-1, required=True, type=click.Path(dir_okay=False))
@out_option
@click.pass_context
@handle_errors
def norm_scaling(ctx, paths, out):
    """Mixed (2,1) and (1,1) norms of every matrix across checkpoints."""
    app = get_app_context(ctx)
    app.sources = open_sources(paths, app.settings)
    _emit_csv(run_norm_scaling(app.sources, app.settings), NORM_SCALING_COLUMNS, out)


@main.command()
@click.option(
    "--suite",
    "suites",
    envvar="SCHATTEN_SUITES",
    default="all",
    help="Suites to run: 'all', comma-separated names "
    f"({', '.join(ALLOWED_SUITES)}) or a file with one name per line.",
)
@click.option(
    "--trials", type=click.IntRange(min=1), default=DEFAULT_TRIALS, show_default=True
)
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@out_option
@handle_errors
def verify(suites, trials, seed, out):
    """Run the property suites; exit 1 when any property fails."""
    unknown = unknown_suite_names(suites)
    if unknown:
        raise click.UsageError(
            f"Unknown suite(s) {', '.join(unknown)}. "
            f"Expected {', '.join(ALLOWED_SUITES)}"
        )
    names = parse_suite_names(suites)
    if not names:
        raise click.UsageError(
            f"No valid suite in {suites!r}. Expected {', '.join(ALLOWED_SUITES)}"
        )
    results = run_suites(names, trials, seed)
    summary: dict[str, Any] = {
        "schema": REPORT_SCHEMA_VERSION,
        "passed": all(result.passed for result in results),
        "suites": [result.to_dict() for result in results],
    }
    violation = next(
        (v for v in (result.violation() for result in results) if v is not None), None
    )
    if violation is not None:
        summary["error"] = violation.to_record()
    _emit(dumps(summary), out)
    if violation is not None:
        logger.error(f"Verification failed: {violation}")
        sys.exit(EXIT_PROPERTY_VIOLATION)


@main.command("regime-table")
@click.option(
    "--width", "-N", type=click.FloatRange(min=0, min_open=True), default=768.0
)
@click.option(
    "--depth", "-L", type=click.FloatRange(min=0, min_open=True), default=12.0
)
@click.option(
    "--c",
    "c",
    type=click.FloatRange(min=0, min_open=True),
    default=1.0,
    help="Per-layer spectral constant C.",
)
@click.option(
    "--rank",
    "r",
    type=click.FloatRange(min=0, min_open=True),
    default=float(DEFAULT_HEAD_DIM),
    help="Rank r of the rank regime.",
)
@click.option(
    "--c-f",
    "c_f",
    type=click.FloatRange(min=0, min_open=True),
    default=1.0,
    help="Frobenius constant C_F of the Frobenius regime.",
)
@out_option
@handle_errors
def regime_table(width, depth, c, r, c_f, out):
    """Leading factors of the three bounds in every constraint regime."""
    _emit_csv(run_regime_table(width, depth, c, r, c_f), REGIME_COLUMNS, out)


@main.command()
@click.option(
    "--spec",
    "spec_path",
    type=click.Path(dir_okay=False),
    help="JSON synthetic spec; the other shape flags are ignored when given.",
)
@click.option("--depth", "-L", type=click.IntRange(min=1))
@click.option("--width", "-N", type=click.IntRange(min=1))
@click.option("--head-dim", "synth_head_dim", type=click.IntRange(min=1))
@click.option("--intermediate", type=click.IntRange(min=1))
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@click.option(
    "--dtype",
    type=click.Choice(["F64", "F32", "F16", "BF16"]),
    default="F32",
    show_default=True,
)
@click.option(
    "--out",
    required=True,
    type=click.Path(dir_okay=False),
    help="Output .safetensors file.",
)
@handle_errors
def synth(spec_path, depth, width, synth_head_dim, intermediate, seed, dtype, out):
    """Write a synthetic BERT-style checkpoint."""
    if spec_path is not None:
        spec = load_synth_spec(spec_path)
    else:
        if depth is None or width is None:
            raise click.UsageError("synth needs --spec or both --depth and --width")
        values = {
            "depth": depth,
            "width": width,
            "head_dim": synth_head_dim,
            "intermediate": intermediate,
            "seed": seed,
            "dtype": dtype,
        }
        try:
            spec = SynthSpec(**{k: v for k, v in values.items() if v is not None})
        except ValidationError as e:
            raise InputError(f"Invalid synthetic spec: {e}") from e
    summary = write_synth(spec, out)
    summary["name"] = SyntheticSpecSource(spec, spec_path).name
    click.echo(dumps(summary), nl=False)


@main.command()
@click.argument("path", required=False, type=click.Path(dir_okay=False))
@click.option(
    "--depth", "-L", type=click.IntRange(min=1), default=2, show_default=True
)
@click.option(
    "--width", "-N", type=click.IntRange(min=2), default=16, show_default=True
)
@click.option(
    "--radius",
    type=click.FloatRange(min=0, min_open=True),
    default=1.0,
    show_default=True,
    help="Spectral norm of every matrix of a random instance.",
)
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
@out_option
@grid_option
@rank_tol_option
@click.pass_context
@handle_errors
def posthoc(ctx, path, depth, width, radius, seed, out, grid_size, rank_tol):
    """Post hoc bound of a theory-model weight file or a random instance."""
    app = get_app_context(ctx)
    settings = with_overrides(app.settings, rank_tol=rank_tol, grid_size=grid_size)
    if path is not None:
        weights, instance = load_theory_weights(path)
    else:
        weights, instance = random_theory_instance(depth, width, radius, seed)
    _emit(dumps(run_posthoc(weights, instance, settings, app.version)), out)


if __name__ == "__main__":
    main()
