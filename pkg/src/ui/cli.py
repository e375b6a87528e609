"""
Rich console output for the command-line front end.
"""
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Dict, Iterator, List, Optional

import math
import numpy as np
import pandas as pd
from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, MofNCompleteColumn, Progress, SpinnerColumn, TextColumn, TimeElapsedColumn
from rich.table import Table

import sys

# Ensure proper path setup
current_dir = Path(__file__).parent
src_dir = current_dir.parent
sys.path.insert(0, str(src_dir))

from config import settings
from core.auxstats import estimate_assembly_seconds
from core.errors import OneBitError, exit_code_for
from core.model import Scenario
from core.moment_cache import FourthMomentTable


def _format_seconds(seconds: float) -> str:
    if seconds < 60:
        return f"{seconds:.1f} s"
    if seconds < 3600:
        return f"{seconds / 60:.1f} min"
    return f"{seconds / 3600:.2f} h"


class ConsoleReporter:
    """Renders reports, tables and errors to a rich console."""

    def __init__(self, console: Optional[Console] = None, quiet: bool = False):
        self.console = console or Console()
        self.err_console = Console(stderr=True)
        self.quiet = quiet

    def print_scenario_check(self, scn: Scenario, path: Path, threads: Optional[int] = None) -> None:
        """Print the validation report of a scenario file."""
        table = Table(title=f"Scenario {scn.name or path.name}", show_header=False)
        table.add_column("Property", style="cyan", width=28)
        table.add_column("Value", style="white")

        table.add_row("File", str(path))
        table.add_row("Sources D", str(scn.D))
        table.add_row("Window M", str(scn.M))
        table.add_row("Statistics C", str(scn.n_pairs))
        table.add_row("Quadruples binomial(M, 4)", str(scn.n_quadruples))
        table.add_row("Sampler ratio", f"{scn.sampler_ratio:g}")
        for d, (w, b) in enumerate(zip(scn.omega, scn.bandwidth), start=1):
            table.add_row(f"Source {d}", f"omega_bar = {w:.6g}, bandwidth_bar = {b:.6g}")
        workers = max(1, threads or settings.default_threads)
        table.add_row("Assembly estimate", f"{_format_seconds(estimate_assembly_seconds(scn, workers))} "
                                           f"per table on {workers} thread(s)")
        self.console.print(table)

    def print_modes(self, modes: List[Dict]) -> None:
        table = Table(title="Sweep Modes", show_header=True, header_style="bold magenta")
        table.add_column("Mode", style="cyan", no_wrap=True)
        table.add_column("Category", style="yellow")
        table.add_column("Columns (D = 2)", style="white")
        table.add_column("Description", style="white")
        for mode in modes:
            table.add_row(mode["name"], mode["category"], ", ".join(mode["columns"]), mode["description"])
        self.console.print(table)

    def print_settings(self) -> None:
        table = Table(title="Current Settings", show_header=False)
        table.add_column("Setting", style="cyan", width=28)
        table.add_column("Value", style="white")
        for name, value in settings.model_dump().items():
            table.add_row(name, str(value))
        self.console.print(table)

    def print_frame(self, frame: pd.DataFrame, title: str, max_rows: int = 40) -> None:
        """Show the rows of a result frame (numbers with 6 significant digits)."""
        if self.quiet:
            return
        table = Table(title=title, show_header=True, header_style="bold magenta")
        for col in frame.columns:
            table.add_column(str(col), justify="right")
        for _, row in frame.head(max_rows).iterrows():
            table.add_row(*(self._cell(v) for v in row.tolist()))
        self.console.print(table)
        if len(frame) > max_rows:
            self.console.print(f"[dim]... and {len(frame) - max_rows} more rows[/dim]")

    @staticmethod
    def _cell(value) -> str:
        if isinstance(value, (float, np.floating)):
            return "nan" if math.isnan(value) else f"{value:.6g}"
        return str(value)

    def print_table_info(self, table: FourthMomentTable, path: Optional[Path] = None) -> None:
        info = Table(title="Fourth-Moment Table", show_header=False)
        info.add_column("Property", style="cyan", width=20)
        info.add_column("Value", style="white")
        if path is not None:
            info.add_row("File", str(path))
        info.add_row("Window M", str(table.M))
        info.add_row("Entries", str(table.moments.size))
        info.add_row("Scenario", table.scenario_fp)
        info.add_row("Theta", table.theta_fp)
        if table.moments.size:
            info.add_row("Range", f"[{table.moments.min():.6g}, {table.moments.max():.6g}]")
        self.console.print(info)

    def print_written(self, path: Path, rows: int) -> None:
        if not self.quiet:
            self.console.print(f"[green]Wrote {rows} row(s) to {path}[/green]")

    def print_error(self, exc: BaseException) -> int:
        """Print an error panel and return the exit code for it."""
        code = exit_code_for(exc)
        kind = "Validation error" if code == 2 else "Numerical failure" if code == 3 else "Error"
        message = str(exc) if isinstance(exc, OneBitError) else f"{type(exc).__name__}: {exc}"
        self.err_console.print(Panel(message, title=kind, style="red", border_style="red"))
        return code

    @contextmanager
    def progress(self, total: int, description: str) -> Iterator[Callable[..., None]]:
        """Progress bar context; yields a callback that advances it by one."""
        if self.quiet:
            yield lambda *args: None
            return
        with Progress(SpinnerColumn(), TextColumn("[bold cyan]{task.description}"), BarColumn(),
                      MofNCompleteColumn(), TimeElapsedColumn(), console=self.err_console,
                      transient=True) as bar:
            task = bar.add_task(description, total=total)
            yield lambda *args: bar.advance(task)
