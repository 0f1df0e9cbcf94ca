"""
Tables of search results: rich tables for the terminal and tab-separated files for later use.
"""

from collections.abc import Sequence
from typing import Any, Optional

import numpy as np
from rich.console import Console
from rich.table import Table

from unitfinder_cli.app.search import RunAggregate, SearchResult
from unitfinder_cli.app.studies import ComparisonRow

__all__ = [
    "COMPARISON_COLUMNS",
    "PREVALENCE_COLUMNS",
    "comparison_summary",
    "comparison_table",
    "prevalence_rows",
    "prevalence_table",
    "print_tables",
    "runs_table",
    "summary_table",
]

PREVALENCE_COLUMNS = ("unit", "layer", "index", "prevalence", "direction", "baseline_mean", "baseline_std")
COMPARISON_COLUMNS = ("estimator", "alpha", "runs", "accuracy", "units", "steps", "seconds")
TITLE_STYLE = "bold green"


def _pm(stats: Sequence[float], digits: int = 3) -> str:
    return f"{stats[0]:.{digits}f} ± {stats[1]:.{digits}f}"


def prevalence_rows(aggregate: RunAggregate) -> list[dict[str, Any]]:
    """
    One row per (unit, direction), most prevalent units first.

    Units are numbered over the concatenated hidden vectors; ``layer`` and ``index`` locate them.
    """
    rows = []
    for unit, prevalence in aggregate.prevalence.items():
        for direction, baselines in aggregate.baselines.items():
            if unit not in baselines:
                continue
            mean, std = baselines[unit]
            layer, index = aggregate.locations[unit]
            rows.append(
                {
                    "unit": unit,
                    "layer": layer,
                    "index": index,
                    "prevalence": prevalence,
                    "direction": direction,
                    "baseline_mean": mean,
                    "baseline_std": std,
                }
            )
    return rows


def prevalence_table(aggregate: RunAggregate, limit: Optional[int] = None) -> Table:
    table = Table(title=f"\nUnits found in {aggregate.runs} run(s)", title_style=TITLE_STYLE)
    for column in ("Unit", "Layer", "Index", "Found", "Direction", "Baseline"):
        table.add_column(column, justify="right" if column != "Direction" else "left")
    rows = prevalence_rows(aggregate)
    for row in rows[:limit] if limit else rows:
        table.add_row(
            str(row["unit"]),
            str(row["layer"]),
            str(row["index"]),
            f"{100 * row['prevalence']:.0f}%",
            row["direction"],
            _pm((row["baseline_mean"], row["baseline_std"]), 2),
        )
    return table


def summary_table(aggregate: RunAggregate) -> Table:
    table = Table(title="\nSummary", title_style=TITLE_STYLE, show_header=False)
    table.add_row("[bold cyan]Runs", str(aggregate.runs))
    table.add_row("[bold cyan]Accuracy", _pm(aggregate.accuracy))
    table.add_row("[bold cyan]Units", _pm(aggregate.units, 1))
    table.add_row("[bold cyan]Mean KL", _pm(aggregate.kl, 4))
    table.add_row("[bold cyan]Seconds", _pm(aggregate.seconds, 1))
    return table


def runs_table(results: Sequence[SearchResult]) -> Table:
    table = Table(title="\nRuns", title_style=TITLE_STYLE)
    for column in ("Run", "Seed", "Accuracy", "Units", "KL", "Steps", "Flags"):
        table.add_column(column, justify="left" if column in ("Run", "Flags") else "right")
    for result in results:
        flags = []
        if result.degenerate:
            flags.append("[yellow]degenerate (empty mask)")
        if result.constraint_violated:
            flags.append("[red]over budget")
        table.add_row(
            result.run_id,
            str(result.seed),
            f"{result.accuracy:.3f}",
            str(result.n_units),
            f"{result.mean_kl:.4f}",
            str(result.steps),
            ", ".join(flags),
        )
    return table


def comparison_summary(rows: Sequence[ComparisonRow]) -> list[dict[str, Any]]:
    """Mean accuracy, units, steps and seconds per estimator and ``alpha``, in first-seen order"""
    groups: dict[tuple[str, float], list[ComparisonRow]] = {}
    for row in rows:
        groups.setdefault((row.estimator, row.alpha), []).append(row)
    summary = []
    for (estimator, alpha), group in groups.items():
        summary.append(
            {
                "estimator": estimator,
                "alpha": alpha,
                "runs": len(group),
                "accuracy": float(np.mean([r.accuracy for r in group])),
                "units": float(np.mean([r.units for r in group])),
                "steps": float(np.mean([r.steps for r in group])),
                "seconds": float(np.mean([r.seconds for r in group])),
            }
        )
    return summary


def comparison_table(rows: Sequence[ComparisonRow]) -> Table:
    table = Table(title="\nEstimator comparison", title_style=TITLE_STYLE)
    for column in ("Estimator", "α", "Runs", "Acc. (↑)", "Units (↓)", "Steps", "Seconds (↓)"):
        table.add_column(column, justify="left" if column == "Estimator" else "right")
    for row in comparison_summary(rows):
        table.add_row(
            row["estimator"],
            f"{row['alpha']:g}",
            str(row["runs"]),
            f"{100 * row['accuracy']:.1f}",
            f"{row['units']:.1f}",
            f"{row['steps']:.0f}",
            f"{row['seconds']:.1f}",
        )
    return table


def print_tables(*tables: Table, console: Optional[Console] = None) -> None:
    console = console or Console()
    for table in tables:
        console.print(table)

