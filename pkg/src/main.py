"""
Main entry point for the one-bit spectral estimator.
"""
import sys
from pathlib import Path

# Add src to path for imports
current_dir = Path(__file__).parent
sys.path.insert(0, str(current_dir))

from typing import Callable, List, Optional

import typer

from core.errors import OneBitError, ValidationError
from core.sweep import SweepRunner, SweepSpec, command_modes, parse_sweep_axis, resolve_options
from ui.cli import ConsoleReporter
from utils.logging_utils import configure_logging

app = typer.Typer(
    name="onebit",
    help="Spectral power estimation from hard-limited (1-bit) samples",
    add_completion=False,
)
table_app = typer.Typer(help="Dump, load and inspect fourth-moment tables")
app.add_typer(table_app, name="moment-table")

reporter = ConsoleReporter()


@app.callback()
def configure(
    log_level: Optional[str] = typer.Option(None, "--log-level", help="Log level (default from settings)"),
    log_json: bool = typer.Option(False, "--log-json", help="Emit JSON log lines"),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Only print errors"),
):
    """Set up logging and console output for every command."""
    configure_logging(level=log_level, json_output=log_json or None, force=True)
    reporter.quiet = quiet


def _guarded(action: Callable[[], None]) -> None:
    try:
        action()
    except OneBitError as exc:
        raise typer.Exit(code=reporter.print_error(exc))


def _run_sweep(command: str, scenario: Path, theta1_db: float, sweep: str,
               n: Optional[int], k: Optional[int], iters: Optional[int], floor_db: Optional[float],
               seed: Optional[int], mode: Optional[str], out: Path, preset: Optional[str],
               threads: Optional[int], trials_out: Optional[Path]) -> None:
    start, stop, step = parse_sweep_axis(sweep)
    options = resolve_options(
        {"n": n, "k": k, "iters": iters, "floor_db": floor_db, "seed": seed, "threads": threads}, preset)
    spec = SweepSpec.build(
        scenario=scenario, theta1_db=theta1_db, sweep_from=start, sweep_to=stop, sweep_step=step,
        modes=command_modes(command, mode), out=out, preset=preset, trials_out=trials_out,
        **options,
    )
    runner = SweepRunner(spec)
    grid = spec.grid()
    with reporter.progress(grid.size, f"{', '.join(runner.modes)} on {grid.size} point(s)") as advance:
        runner.on_point = advance
        frame = runner.run_sync()
    path = runner.write(frame)
    reporter.print_frame(frame, title=f"{spec.scenario.name}: theta1 = {spec.theta1_db:g} dB")
    reporter.print_written(path, len(frame))


_SCENARIO = typer.Option(..., "--scenario", help="Scenario file (.scn)")
_THETA1 = typer.Option(..., "--theta1-db", help="Fixed level of the other sources in dB")
_SWEEP = typer.Option(..., "--sweep", help="Grid of the second source in dB, FROM:TO:STEP")
_N = typer.Option(None, "--n", help="Windows per dataset N")
_K = typer.Option(None, "--k", help="Monte-Carlo realizations K (0 disables mc modes)")
_ITERS = typer.Option(None, "--iters", help="Scoring iterations I")
_FLOOR = typer.Option(None, "--floor-db", help="Back-projection floor in dB")
_SEED = typer.Option(None, "--seed", help="Root seed")
_OUT = typer.Option(..., "--out", help="Output CSV path")
_PRESET = typer.Option(None, "--preset", help="Option preset (desk, full)")
_THREADS = typer.Option(None, "--threads", help="Worker threads")
_TRIALS = typer.Option(None, "--trials-out", help="Also write per-trial estimates to this CSV")


@app.command()
def loss(
    scenario: Path = _SCENARIO, theta1_db: float = _THETA1, sweep: str = _SWEEP,
    n: Optional[int] = _N, k: Optional[int] = _K, iters: Optional[int] = _ITERS,
    floor_db: Optional[float] = _FLOOR, seed: Optional[int] = _SEED,
    mode: Optional[str] = typer.Option(None, "--mode", help="Comma-separated modes (default: loss)"),
    out: Path = _OUT, preset: Optional[str] = _PRESET, threads: Optional[int] = _THREADS,
    trials_out: Optional[Path] = _TRIALS,
):
    """Information loss chi_d (dB) over the sweep grid."""
    _guarded(lambda: _run_sweep("loss", scenario, theta1_db, sweep, n, k, iters, floor_db, seed,
                                mode, out, preset, threads, trials_out))


@app.command()
def uncertainty(
    scenario: Path = _SCENARIO, theta1_db: float = _THETA1, sweep: str = _SWEEP,
    n: Optional[int] = _N, k: Optional[int] = _K, iters: Optional[int] = _ITERS,
    floor_db: Optional[float] = _FLOOR, seed: Optional[int] = _SEED,
    mode: Optional[str] = typer.Option(None, "--mode", help="Modes among crb, mc-quant, mc-ideal (crb always runs)"),
    out: Path = _OUT, preset: Optional[str] = _PRESET, threads: Optional[int] = _THREADS,
    trials_out: Optional[Path] = _TRIALS,
):
    """Predicted and empirical relative uncertainty over the sweep grid."""
    _guarded(lambda: _run_sweep("uncertainty", scenario, theta1_db, sweep, n, k, iters, floor_db, seed,
                                mode, out, preset, threads, trials_out))


@app.command()
def check(
    scenario: Path = typer.Argument(..., help="Scenario file to validate"),
    threads: Optional[int] = typer.Option(None, "--threads", help="Threads assumed for the cost estimate"),
):
    """Parse and validate a scenario file and print its sizes."""
    from utils.file_utils import find_file, parse_scenario_file

    def action() -> None:
        scn = parse_scenario_file(scenario)
        reporter.print_scenario_check(scn, find_file(scenario) or scenario, threads=threads)

    _guarded(action)


def _parse_levels(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValidationError("levels must be comma-separated numbers in dB", theta_db=text)


@table_app.command("dump")
def table_dump(
    scenario: Path = _SCENARIO,
    theta_db: str = typer.Option(..., "--theta-db", help="Source levels in dB, comma-separated"),
    out: Optional[Path] = typer.Option(None, "--out", help="Target .npz (default: cache directory)"),
    threads: Optional[int] = _THREADS,
):
    """Compute the fourth-moment table at one parameter vector and write it."""
    from core.auxstats import fourth_moment_table
    from core.model import ParamVector
    from core.moment_cache import get_moment_cache
    from utils.file_utils import parse_scenario_file

    def action() -> None:
        scn = parse_scenario_file(scenario)
        levels = _parse_levels(theta_db)
        if len(levels) != scn.D:
            raise ValidationError("one level per source is required", D=scn.D, got=len(levels))
        cache = get_moment_cache()
        table = fourth_moment_table(scn, ParamVector.from_db(levels), cache=cache, threads=threads)
        path = cache.dump(table, out)
        reporter.print_table_info(table, path)

    _guarded(action)


@table_app.command("load")
def table_load(path: Path = typer.Argument(..., help="Table file written by 'dump'")):
    """Validate a table file and register it in the in-process cache."""
    from core.moment_cache import get_moment_cache

    def action() -> None:
        table = get_moment_cache().load(path)
        reporter.print_table_info(table, path)

    _guarded(action)


@table_app.command("info")
def table_info(path: Optional[Path] = typer.Argument(None, help="Table file; omit to list the cache directory")):
    """Describe one table file or list the cached tables."""
    from core.moment_cache import get_moment_cache

    def action() -> None:
        cache = get_moment_cache()
        if path is not None:
            reporter.print_table_info(cache.load(path, register=False), path)
            return
        files = cache.list_files()
        if not files:
            reporter.console.print(f"[yellow]No tables in {cache.cache_dir}[/yellow]")
        for f in files:
            reporter.console.print(str(f))

    _guarded(action)


@table_app.command("clear")
def table_clear():
    """Delete the table files in the cache directory and empty the in-process cache."""
    from core.moment_cache import get_moment_cache

    cache = get_moment_cache()
    removed = cache.cleanup()
    cache.clear()
    reporter.console.print(f"[green]Removed {removed} table file(s) from {cache.cache_dir}[/green]")


@app.command()
def modes():
    """List the registered sweep modes."""
    from tools import get_mode_registry

    reporter.print_modes(get_mode_registry().describe())


@app.command()
def show_settings():
    """Show current settings."""
    reporter.print_settings()


def main():
    """Main entry point."""
    app()


if __name__ == "__main__":
    main()
