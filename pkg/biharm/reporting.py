"""Serializers for study reports: CSV, JSON and rich tables."""

from __future__ import annotations

import csv
import io
import logging
import math
from typing import Any, Iterable, List, Optional, Sequence, Tuple, Type, Union

import orjson
from pydantic import BaseModel
from rich.console import Console
from rich.table import Table

from .analysis.studies import BoundaryScalingReport, ConvergenceReport, VerifyReport
from .core.errors import ReportFormatError

LOGGER = logging.getLogger(__name__)

FORMATS = ("csv", "json", "pretty")

Report = Union[ConvergenceReport, BoundaryScalingReport, VerifyReport]

CONVERGENCE_COLUMNS = ("m", "h", "error_h2h", "pairwise_rate", "cg_iters")
SCALING_COLUMNS = ("m", "h", "norm", "seminorm", "pairwise_rate")
VERIFY_COLUMNS = ("name", "value", "comparison", "tolerance", "passed")


def format_float(value: Optional[float]) -> str:
    """17 significant digits; empty for a missing value."""
    if value is None:
        return ""
    return "{:.17g}".format(value)


def _check_finite(values: Iterable[Any]) -> None:
    for value in values:
        if isinstance(value, float) and not math.isfinite(value):
            raise ReportFormatError(f"Report contains a non-finite value ({value})")


def _table(report: Report) -> Tuple[Sequence[str], List[Tuple[Any, ...]], Optional[float]]:
    if isinstance(report, ConvergenceReport):
        rows = [(e.m, e.h, e.error_h2h, e.pairwise_rate, e.cg_iters) for e in report.entries]
        return CONVERGENCE_COLUMNS, rows, report.fitted_rate
    if isinstance(report, BoundaryScalingReport):
        rows = [(r.m, r.h, r.norm, r.seminorm, r.pairwise_rate) for r in report.rows]
        return SCALING_COLUMNS, rows, report.fitted_rate
    if isinstance(report, VerifyReport):
        rows = [(p.name, p.value, p.comparison, p.tolerance, p.passed) for p in report.probes]
        return VERIFY_COLUMNS, rows, None
    raise ReportFormatError(f"Unsupported report type {type(report).__name__}")


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) or value is None:
        return format_float(value)
    return str(value)


def _emit_csv(report: Report, columns: Sequence[str], rows: List[Tuple[Any, ...]], fitted: Optional[float]) -> bytes:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(value) for value in row])
    if not isinstance(report, VerifyReport):
        buffer.write(f"# fitted_rate={format_float(fitted) if fitted is not None else 'none'}\n")
    return buffer.getvalue().encode("utf-8")


def _emit_json(report: Report) -> bytes:
    return orjson.dumps(report.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS | orjson.OPT_INDENT_2)


def _title(report: Report) -> str:
    if isinstance(report, ConvergenceReport):
        return f"Convergence: {report.case} / {report.scheme} (n={report.dim})"
    if isinstance(report, BoundaryScalingReport):
        return f"Boundary scaling: {report.source} / {report.variant} (axis x{report.axis + 1})"
    return f"Verification (n={report.dim}, m={report.m}, seed={report.seed})"


def render_table(report: Report) -> Table:
    columns, rows, fitted = _table(report)
    caption = None if fitted is None and isinstance(report, VerifyReport) else f"fitted rate: {format_float(fitted) or 'n/a'}"
    table = Table(title=_title(report), caption=caption)
    for column in columns:
        table.add_column(column, justify="left" if column == "name" else "right")
    for row in rows:
        cells = []
        for value in row:
            if isinstance(value, bool):
                cells.append("[green]pass[/green]" if value else "[red]FAIL[/red]")
            elif isinstance(value, float):
                cells.append(f"{value:.6g}")
            else:
                cells.append("-" if value is None else str(value))
        table.add_row(*cells)
    return table


def _emit_pretty(report: Report) -> bytes:
    buffer = io.StringIO()
    Console(file=buffer, width=110, color_system=None).print(render_table(report))
    return buffer.getvalue().encode("utf-8")


def emit_report(report: Report, format: str = "csv") -> bytes:
    """Serialize a report.

    CSV columns for a convergence report are exactly ``m, h, error_h2h,
    pairwise_rate, cg_iters`` followed by a ``# fitted_rate=<value>`` line.

    Raises:
        ReportFormatError: for an empty report, a non-finite value or an
            unknown format.
    """
    if format not in FORMATS:
        raise ReportFormatError(f"Unknown report format {format!r}; expected one of {', '.join(FORMATS)}")
    columns, rows, fitted = _table(report)
    if not rows:
        raise ReportFormatError("Cannot emit an empty report")
    for row in rows:
        _check_finite(row)
    _check_finite([fitted])
    if format == "csv":
        return _emit_csv(report, columns, rows, fitted)
    if format == "json":
        return _emit_json(report)
    return _emit_pretty(report)


def parse_report(data: Union[bytes, str], model: Type[BaseModel] = ConvergenceReport) -> BaseModel:
    """Inverse of the JSON emitter."""
    try:
        return model.model_validate(orjson.loads(data))
    except orjson.JSONDecodeError as exc:
        raise ReportFormatError(f"Invalid report JSON: {exc}") from exc


__all__ = [
    "CONVERGENCE_COLUMNS",
    "FORMATS",
    "emit_report",
    "format_float",
    "parse_report",
    "render_table",
]
