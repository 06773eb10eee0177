"""Series output: CSV / JSON files and console summaries."""

import csv
import json
import math
import subprocess
from pathlib import Path
from typing import Any

from rich.console import Console
from rich.table import Table

from . import __version__
from .experiments import MetricSeries

console = Console()

INFEASIBLE_TOKEN = "infeasible"


def git_describe() -> str:
    """`git describe` of the source tree, or "unknown" outside a checkout."""
    try:
        result = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=Path(__file__).parent,
            check=False,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return result.stdout.strip() if result.returncode == 0 and result.stdout.strip() else "unknown"


def _format_value(value: float | None) -> str:
    if value is None:
        return INFEASIBLE_TOKEN
    return f"{value:.15g}"


def _json_value(value: float | None) -> float | None:
    if value is None or not math.isfinite(value):
        return None
    return value


def save_csv(series: MetricSeries, output_path: Path) -> Path:
    """Header row of column names, one row per x point, 15 significant digits."""
    output_path.parent.mkdir(parents=True, exist_ok=True)
    names = list(series.metrics)
    with open(output_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([series.x_label, *names])
        for i, x in enumerate(series.x_values):
            writer.writerow(
                [_format_value(x), *(_format_value(series.metrics[n][i]) for n in names)]
            )
    return output_path


def save_json(series: MetricSeries, output_path: Path) -> Path:
    """MetricSeries with a metadata block; infeasible points are null."""
    output_path.parent.mkdir(parents=True, exist_ok=True)
    report: dict[str, Any] = {
        "x_label": series.x_label,
        "x_values": [_json_value(x) for x in series.x_values],
        "metrics": {
            name: [_json_value(v) for v in values] for name, values in series.metrics.items()
        },
        "metadata": {
            **series.metadata,
            "version": __version__,
            "git_describe": git_describe(),
        },
    }
    with open(output_path, "w", encoding="utf-8") as f:
        json.dump(report, f, ensure_ascii=False, indent=2, sort_keys=False)
        f.write("\n")
    return output_path


def save_series(series: MetricSeries, output_path: Path, fmt: str = "csv") -> Path:
    """Write a series as "csv" or "json"."""
    if fmt == "csv":
        path = save_csv(series, output_path)
    elif fmt == "json":
        path = save_json(series, output_path)
    else:
        raise ValueError(f"Unknown series format: {fmt}")
    console.print(f"[green]Series saved:[/] {path}")
    return path


def print_series(series: MetricSeries, title: str, max_rows: int = 25) -> None:
    """Print a summary table of a series."""
    table = Table(title=title)
    table.add_column(series.x_label, style="cyan", justify="right")
    for name in series.metrics:
        table.add_column(name, justify="right")

    step = max(1, math.ceil(len(series.x_values) / max_rows))
    for i in range(0, len(series.x_values), step):
        cells = []
        for values in series.metrics.values():
            v = values[i]
            cells.append("[red]infeasible[/]" if v is None else f"{v:.4g}")
        table.add_row(f"{series.x_values[i]:.4g}", *cells)

    console.print(table)
    if step > 1:
        console.print(f"[dim]Showing every {step}th of {len(series.x_values)} points[/]")
    console.print()
