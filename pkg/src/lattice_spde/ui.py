"""UI module for console output, progress and logging."""

from __future__ import annotations

import logging
from contextlib import contextmanager
from typing import Callable, Iterator, Sequence

from rich.console import Console
from rich.logging import RichHandler
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from .models import OutputFile

console = Console()


def configure_logging(verbose: bool = False) -> None:
    """Route library logging through rich."""
    root = logging.getLogger("lattice_spde")
    root.handlers.clear()
    root.addHandler(RichHandler(console=console, show_path=False, rich_tracebacks=False))
    root.setLevel(logging.DEBUG if verbose else logging.WARNING)
    root.propagate = False


def show_error(message: str) -> None:
    """Display an error message."""
    console.print(f"[bold red]Error:[/bold red] {message}")


def show_progress(output: OutputFile) -> None:
    """Display a written file."""
    console.print(f"  [green]✓ {output.name}[/green] [dim]({output.size} bytes)[/dim]")


def show_completion(command: str, outputs: Sequence[OutputFile], out_dir: str) -> None:
    """Display completion message."""
    console.print()
    console.print(f"[bold green]✨ {command}: {len(outputs)} file(s) written to {out_dir}[/bold green]")


def show_table(title: str, columns: Sequence[str], rows: Sequence[Sequence[object]]) -> None:
    """Display a summary table."""
    table = Table(title=title, title_style="bold cyan")
    for col in columns:
        table.add_column(col, justify="right")
    for row in rows:
        table.add_row(*[f"{v:.6g}" if isinstance(v, float) else str(v) for v in row])
    console.print(table)


@contextmanager
def sample_progress(total: int, description: str = "Sampling") -> Iterator[Callable[[int], None]]:
    """Progress bar yielding a per-sample advance callback."""
    with Progress(
        TextColumn("[cyan]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        transient=True,
    ) as progress:
        task = progress.add_task(description, total=total)
        yield lambda _index: progress.advance(task)
