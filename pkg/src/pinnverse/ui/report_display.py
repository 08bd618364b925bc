"""Rich tables for fit reports, metrics and sweep summaries."""

import math
from typing import Any, List, Optional

import pandas as pd
from rich.console import Console, Group, RenderableType
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from pinnverse.core.models import FitReport, MetricSet

# Percentage-error colouring
PCT_GOOD_THRESHOLD = 0.01
PCT_FAIR_THRESHOLD = 0.1


def format_value(value: Optional[float], spec: str = ".4g") -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return format(value, spec)


def format_pct(fraction: Optional[float]) -> str:
    """Fraction as a coloured percentage markup string."""
    if fraction is None or math.isnan(fraction):
        return "[dim]-[/]"
    if fraction < PCT_GOOD_THRESHOLD:
        color = "green"
    elif fraction < PCT_FAIR_THRESHOLD:
        color = "yellow"
    else:
        color = "red"
    return f"[{color}]{100 * fraction:.3g}%[/]"


class ReportDisplayComponent:
    """Display component for fit reports and sweep tables."""

    def __init__(self, console: Optional[Console] = None):
        """Initialize the display component.

        Args:
            console: Optional Console instance for rich output
        """
        self.console = console or Console()

    def parameter_table(
        self, report: FitReport, reference: Optional[Any] = None
    ) -> Table:
        """Recovered parameters, with exact values and errors when known.

        Args:
            report: Fit report to show
            reference: Optional ParameterSet printed alongside
        """
        table = Table(title="Recovered parameters", header_style="bold")
        table.add_column("Parameter")
        table.add_column("Recovered", justify="right")
        if reference is not None:
            table.add_column("Reference", justify="right")
        if report.truth is not None:
            table.add_column("Exact", justify="right")
            table.add_column("Error", justify="right")

        reference_values = reference.vector() if reference is not None else None
        for i, (label, value) in enumerate(
            zip(report.recovered.labels, report.recovered.vector())
        ):
            entry = report.errors.get(label, {})
            if entry and not entry.get("trainable", True):
                label = f"[dim]{label}[/]"
            row: List[str] = [label, format_value(float(value))]
            if reference_values is not None:
                row.append(format_value(float(reference_values[i])))
            if report.truth is not None:
                row.append(format_value(entry.get("exact")))
                row.append(format_pct(entry.get("pct_error")))
            table.add_row(*row)
        return table

    def metrics_table(
        self,
        metrics: MetricSet,
        reference: Optional[MetricSet] = None,
        title: str = "Errors",
    ) -> Table:
        table = Table(title=title, header_style="bold")
        table.add_column("Metric")
        table.add_column("PINNverse", justify="right")
        if reference is not None:
            table.add_column("Reference", justify="right")
        for group, value in metrics.mape.items():
            excluded = metrics.excluded.get(group)
            name = f"MAPE {group}"
            if excluded:
                name += f" [dim]({excluded} excluded)[/]"
            row = [name, format_pct(value)]
            if reference is not None:
                row.append(format_pct(reference.mape.get(group)))
            table.add_row(*row)
        for label, value in metrics.mae.items():
            row = [f"MAE {label}", format_value(value, ".3e")]
            if reference is not None:
                row.append(format_value(reference.mae.get(label), ".3e"))
            table.add_row(*row)
        return table

    def runs_table(self, report: FitReport) -> Table:
        table = Table(title="Restarts", header_style="bold")
        table.add_column("Seed", justify="right")
        table.add_column("Status")
        table.add_column("Steps", justify="right")
        table.add_column("Final loss", justify="right")
        for run in report.runs:
            marker = " *" if run.seed == report.best_seed else ""
            status = "[green]ok[/]" if run.ok else f"[red]{run.status}[/]"
            table.add_row(
                f"{run.seed}{marker}",
                status,
                str(run.steps),
                format_value(run.final_loss, ".4e"),
            )
        return table

    def summary_table(
        self, summary: pd.DataFrame, title: str = "Sweep summary"
    ) -> Table:
        table = Table(title=title, header_style="bold")
        for column in ("grid", "value", "group"):
            table.add_column(column.capitalize())
        for column in ("mean", "median", "min", "max"):
            table.add_column(column.capitalize(), justify="right")
        table.add_column("ok/failed", justify="right")
        for row in summary.itertuples(index=False):
            table.add_row(
                str(row.grid),
                format_value(row.value, "g"),
                str(row.group),
                format_pct(row.mean),
                format_pct(row.median),
                format_pct(row.min),
                format_pct(row.max),
                f"{row.n_ok}/{row.n_failed}",
            )
        return table

    def format_report(
        self,
        report: FitReport,
        metrics: Optional[MetricSet] = None,
        reference_metrics: Optional[MetricSet] = None,
        reference: Optional[Any] = None,
    ) -> RenderableType:
        parts: List[RenderableType] = [
            self.parameter_table(report, reference),
            self.runs_table(report),
        ]
        if metrics is not None and (metrics.mape or metrics.mae):
            parts.append(self.metrics_table(metrics, reference_metrics))
        header = Text.from_markup(
            f"[bold]{report.n_qubits}-qubit fit[/bold], channels {report.channels}, "
            f"T={report.final_time:g}, best seed {report.best_seed}"
        )
        return Panel(Group(header, *parts), title="pinnverse", expand=False)

    def show(self, renderable: RenderableType) -> None:
        self.console.print(renderable)
