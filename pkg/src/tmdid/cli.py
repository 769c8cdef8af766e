"""
Command-line interface for tmdid.

Provides commands to simulate damaged shear frames, identify their
stiffness with the adaptive UKF, run the covariance and model sweeps
and inspect structures.
"""

import logging
import os
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

import click
import numpy as np

from tmdid import __version__
from tmdid.core.config import RunConfig, StructureConfig, load_config, read_yaml
from tmdid.core.csvio import write_table
from tmdid.core.models import FilterDivergenceError, SensorLayout, ValidationError
from tmdid.dynamics.discretization import check_order, discretize
from tmdid.structure.matrices import assemble_matrices
from tmdid.structure.modal import modal_analysis
from tmdid.structure.state_space import build_state_space

logger = logging.getLogger(__name__)

EXIT_VALIDATION = 1
EXIT_DIVERGENCE = 2


@contextmanager
def _handle_errors() -> Iterator[None]:
    """Map library errors onto exit codes with a message on stderr."""
    try:
        yield
    except FilterDivergenceError as e:
        click.echo(f"Error: filter diverged: {e}", err=True)
        sys.exit(EXIT_DIVERGENCE)
    except ValidationError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(EXIT_VALIDATION)


def _load_run_config(
    ctx: click.Context,
    config_path: Optional[Path],
    seed: Optional[int] = None,
    duration: Optional[float] = None,
    output_dir: Optional[Path] = None,
    workers: Optional[int] = None,
) -> RunConfig:
    """Load the run document and apply command-line overrides."""
    config = load_config(config_path or ctx.obj.get("config_path"))
    if seed is not None:
        config.seed = seed
    if duration is not None:
        config.duration = duration
    if output_dir is not None:
        config.output_dir = output_dir
    if workers is not None:
        config.workers = workers
    for w in config.validate():
        logger.warning("Config: %s", w)
    if not ctx.obj.get("verbose") and not ctx.obj.get("quiet"):
        level = getattr(logging, config.log_level, logging.WARNING)
        logging.getLogger().setLevel(level)
    return config


config_argument = click.argument(
    "config_path",
    metavar="CONFIG",
    required=False,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
)
seed_option = click.option("--seed", type=int, help="Override the run seed")
duration_option = click.option(
    "--duration", type=float, help="Override the record length [s]"
)
output_option = click.option(
    "--output-dir",
    "-o",
    type=click.Path(file_okay=False, path_type=Path),
    help="Output directory (default: $TMDID_OUTPUT_ROOT/<config name>)",
)
workers_option = click.option(
    "--workers", "-j", type=int, help="Parallel worker processes for sweeps"
)



class _Group(click.Group):
    """Command group whose usage errors exit with EXIT_VALIDATION."""

    def make_context(self, info_name, args, parent=None, **extra):
        try:
            return super().make_context(info_name, args, parent=parent, **extra)
        except click.UsageError as e:
            e.exit_code = EXIT_VALIDATION
            raise

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except click.UsageError as e:
            e.exit_code = EXIT_VALIDATION
            raise


@click.group(cls=_Group)
@click.version_option(version=__version__, prog_name="tmdid")
@click.option("-v", "--verbose", is_flag=True, help="Enable verbose output")
@click.option("-q", "--quiet", is_flag=True, help="Suppress non-essential output")
@click.option(
    "-c",
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Default run config for commands given no CONFIG argument",
)
@click.pass_context
def main(
    ctx: click.Context, verbose: bool, quiet: bool, config_path: Optional[Path]
) -> None:
    """tmdid - adaptive UKF stiffness identification for shear frames with TMDs."""
    ctx.ensure_object(dict)
    ctx.obj["verbose"] = verbose
    ctx.obj["quiet"] = quiet
    ctx.obj["config_path"] = config_path

    if verbose:
        log_level = "DEBUG"
    elif quiet:
        log_level = "WARNING"
    else:
        log_level = os.environ.get("TMDID_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, log_level, logging.WARNING),
        format="%(asctime)s %(name)s [%(levelname)s] %(message)s",
        stream=sys.stderr,
    )


@main.command("simulate")
@config_argument
@seed_option
@duration_option
@output_option
@click.pass_context
def simulate_cmd(
    ctx: click.Context,
    config_path: Optional[Path],
    seed: Optional[int],
    duration: Optional[float],
    output_dir: Optional[Path],
) -> None:
    """Simulate the true response and write noisy records.

    Writes excitation, input, truth and measurement CSVs plus a manifest
    of the realized damage events.
    """
    from tmdid.harness.runner import run_simulate

    quiet = ctx.obj.get("quiet", False)
    with _handle_errors():
        config = _load_run_config(ctx, config_path, seed, duration, output_dir)
        paths = run_simulate(config)
    if not quiet:
        for path in paths:
            click.echo(f"Wrote {path}")


@main.command("identify")
@config_argument
@click.option(
    "--input-dir",
    "-i",
    type=click.Path(exists=True, file_okay=False, path_type=Path),
    help="Identify from a directory written by 'simulate'",
)
@seed_option
@duration_option
@output_option
@click.option(
    "--taylor-order",
    type=click.Choice(["1", "2", "3", "4", "exact"]),
    help="Discretization order of the filter model",
)
@click.option("--z0", type=float, help="Threshold quantile (overrides probability)")
@click.option("--no-adaptation", is_flag=True, help="Run the plain UKF")
@click.pass_context
def identify_cmd(
    ctx: click.Context,
    config_path: Optional[Path],
    input_dir: Optional[Path],
    seed: Optional[int],
    duration: Optional[float],
    output_dir: Optional[Path],
    taylor_order: Optional[str],
    z0: Optional[float],
    no_adaptation: bool,
) -> None:
    """Identify story stiffness with the adaptive UKF.

    Without --input-dir the scenario of CONFIG is simulated in memory.
    """
    from tmdid.harness.runner import run_identify

    quiet = ctx.obj.get("quiet", False)
    with _handle_errors():
        config = _load_run_config(ctx, config_path, seed, duration, output_dir)
        if taylor_order is not None:
            config.filter.taylor_order = check_order(taylor_order)
        if z0 is not None:
            config.adaptation.z0 = z0
            config.adaptation.probability = None
        if no_adaptation:
            config.adaptation.enabled = False
        output = run_identify(config, input_dir=input_dir)

    if quiet:
        return
    result = output.result
    click.echo(f"Steps: {result.n_steps}, threshold gamma0={result.threshold:.2f}")
    for event in result.log.events:
        click.echo(
            f"  detection at t={event.time:.3f} s: gamma={event.gamma:.2f}, "
            f"story {result.identified[event.index] + 1}"
        )
    for i, story in enumerate(result.identified):
        line = f"  k{story + 1} = {result.final_stiffness[i]:.1f} N/m"
        if output.metrics is not None:
            line += f" (deviation {output.metrics.deviations[story]:.4f}%)"
        click.echo(line)
    for path in output.paths:
        click.echo(f"Wrote {path}")


@main.command("sweep-covariance")
@config_argument
@click.option("--p0", "p0_grid", type=float, multiple=True, help="P0 scalar (repeat)")
@seed_option
@output_option
@workers_option
@click.pass_context
def sweep_covariance_cmd(
    ctx: click.Context,
    config_path: Optional[Path],
    p0_grid: tuple[float, ...],
    seed: Optional[int],
    output_dir: Optional[Path],
    workers: Optional[int],
) -> None:
    """Final stiffness over a grid of initial covariances."""
    from tmdid.harness.sweeps import sweep_covariance, write_sweep

    with _handle_errors():
        config = _load_run_config(ctx, config_path, seed, None, output_dir, workers)
        rows = sweep_covariance(config, list(p0_grid) or None)
        path = write_sweep(
            config.resolved_output_dir() / "covariance_sweep.csv",
            rows,
            config,
            "covariance",
        )
    if not ctx.obj.get("quiet"):
        click.echo(f"{len(rows)} row(s), wrote {path}")


@main.command("sweep-model")
@config_argument
@click.option("--q", "q_grid", type=float, multiple=True, help="Q scalar (repeat)")
@click.option(
    "--order",
    "orders",
    type=click.Choice(["1", "2", "3", "4", "exact"]),
    multiple=True,
    help="Taylor order or exact (repeat)",
)
@seed_option
@output_option
@workers_option
@click.pass_context
def sweep_model_cmd(
    ctx: click.Context,
    config_path: Optional[Path],
    q_grid: tuple[float, ...],
    orders: tuple[str, ...],
    seed: Optional[int],
    output_dir: Optional[Path],
    workers: Optional[int],
) -> None:
    """Final stiffness deviation over process noise and Taylor order."""
    from tmdid.harness.sweeps import sweep_model, write_sweep

    with _handle_errors():
        config = _load_run_config(ctx, config_path, seed, None, output_dir, workers)
        rows = sweep_model(config, list(q_grid) or None, list(orders) or None)
        path = write_sweep(
            config.resolved_output_dir() / "model_sweep.csv", rows, config, "model"
        )
    if not ctx.obj.get("quiet"):
        click.echo(f"{len(rows)} row(s), wrote {path}")


@main.command("report")
@click.argument(
    "run_dir", type=click.Path(exists=True, file_okay=False, path_type=Path)
)
def report_cmd(run_dir: Path) -> None:
    """Summarize a run directory."""
    from tmdid.harness.report import render_report

    with _handle_errors():
        text = render_report(run_dir)
    click.echo(text)


def _structure_config(path: Path) -> StructureConfig:
    """Structure from a structure document or a run document."""
    data = read_yaml(path)
    if "structure" in data:
        return RunConfig.from_dict(data, base_dir=path.parent).structure
    config = StructureConfig.from_dict(data)
    config.name = config.name or path.stem
    return config


def _export_matrix(path: Path, matrix: np.ndarray, unit: str) -> Path:
    matrix = np.atleast_2d(matrix)
    header = [f"c{j + 1}" for j in range(matrix.shape[1])]
    return write_table(path, header, matrix.tolist(), units=[unit] * len(header))


@main.command("structure")
@click.argument(
    "structure_path",
    metavar="STRUCTURE",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
)
@click.option(
    "--export-dir",
    type=click.Path(file_okay=False, path_type=Path),
    help="Write matrices and state-space models as CSV",
)
@click.option("--ts", type=float, default=0.02, show_default=True, help="Sampling time")
@click.option(
    "--order",
    type=click.Choice(["1", "2", "3", "4", "exact"]),
    default="exact",
    show_default=True,
    help="Discretization order of the exported A_d, B_d",
)
def structure_cmd(
    structure_path: Path, export_dir: Optional[Path], ts: float, order: str
) -> None:
    """Show matrices, modal properties and TMD tuning of a structure."""
    with _handle_errors():
        config = _structure_config(structure_path)
        tuning = config.tuning()
        spec = config.to_spec()
        mats = assemble_matrices(spec)
        bare_modal = modal_analysis(assemble_matrices(config.bare_spec()))
        modal = modal_analysis(mats, reference_dof=spec.top_dof)

        np.set_printoptions(precision=4, suppress=True, linewidth=100)
        click.echo(f"Structure: {config.name or structure_path.stem}")
        click.echo("=" * 40)
        click.echo(f"Stories: {spec.n_stories}, DoFs: {spec.n_dof}")
        labelled = (("M [kg]", mats.M), ("C [N*s/m]", mats.C), ("K [N/m]", mats.K))
        for name, matrix in labelled:
            click.echo(f"{name}:\n{matrix}")
        click.echo("")
        click.echo("Bare structure:")
        for i, (f, d) in enumerate(
            zip(bare_modal.natural_frequencies, bare_modal.damping_ratios), start=1
        ):
            click.echo(f"  mode {i}: f={f:.4f} Hz, D={d * 100:.2f}%")
        if spec.tmd is not None:
            click.echo("With TMD:")
            for i, (f, d) in enumerate(
                zip(modal.natural_frequencies, modal.damping_ratios), start=1
            ):
                click.echo(f"  mode {i}: f={f:.4f} Hz, D={d * 100:.2f}%")
        if tuning is not None:
            click.echo("")
            click.echo("Warburton tuning:")
            for line in tuning.format_summary().splitlines():
                click.echo(f"  {line}")

        if export_dir is None:
            return
        sensors = SensorLayout.accelerometers(range(spec.n_stories))
        space = build_state_space(mats, sensors, structure=spec)
        dss = discretize(space, ts, check_order(order))
        exports = {
            "M": (mats.M, "kg"),
            "C": (mats.C, "N*s/m"),
            "K": (mats.K, "N/m"),
            "A": (space.A, ""),
            "B": (space.B, ""),
            "C_out": (space.C_out, ""),
            "D": (space.D, ""),
            "A_d": (dss.A_d, ""),
            "B_d": (dss.B_d, ""),
        }
        for name, (matrix, unit) in exports.items():
            path = _export_matrix(export_dir / f"{name}.csv", matrix, unit)
            click.echo(f"Wrote {path}")


if __name__ == "__main__":
    main()
