"""Comparison metrics between observed series and simulated trajectories.

Provides the two percentage metrics used in the case-study tables (relative
error of an uncontrolled simulation against observed counts, and the
improvement a controlled run achieves over them) plus a table builder that
samples both simulations on selected calendar days and renders the result
as aligned text or CSV.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass
from decimal import ROUND_DOWN, ROUND_HALF_UP, Decimal
from typing import NamedTuple

from .dataio import ObservedSeries
from .integrate import Trajectory

__all__ = [
    "Improvement",
    "TableRow",
    "ComparisonTable",
    "relative_error",
    "improvement",
    "build_table",
    "render_text",
    "write_table_csv",
    "format_percent",
    "format_count",
]

# observed series name -> state trajectory column
SERIES_COLUMNS = {"Q": 3, "R": 4, "D": 5}


class Improvement(NamedTuple):
    """Magnitude of the controlled-vs-real change and its direction.

    direction is the sign of (controlled - real): +1 when the controlled
    run exceeds the observed count, -1 when it falls below, 0 on a tie.
    """

    percent: float
    direction: int


def relative_error(real: float, model: float) -> float:
    """Percentage relative error 100*|real - model|/real, unrounded.

    Display rounding is a separate concern; see format_percent.
    """
    if real == 0:
        raise ZeroDivisionError("relative error undefined for a zero observed count")
    if real < 0:
        raise ValueError(f"observed count must be positive, got {real}")
    return 100.0 * abs(real - model) / real


def improvement(real: float, controlled: float) -> Improvement:
    """Percentage change of a controlled run against the observed count."""
    if real == 0:
        raise ZeroDivisionError("improvement undefined for a zero observed count")
    if real < 0:
        raise ValueError(f"observed count must be positive, got {real}")
    diff = controlled - real
    sign = (diff > 0) - (diff < 0)
    return Improvement(100.0 * abs(diff) / real, sign)


def format_percent(value: float) -> str:
    """Two-decimal display string, truncated toward zero.

    Truncation (not rounding) is the convention the rendered comparison
    tables follow, so equal inputs reproduce them character for character.
    """
    return str(Decimal(repr(float(value))).quantize(Decimal("0.01"), ROUND_DOWN))


def format_count(value: float) -> str:
    """Whole-count display string, half-up."""
    return str(Decimal(repr(float(value))).quantize(Decimal("1"), ROUND_HALF_UP))


class TableRow(NamedTuple):
    date: _dt.date
    real: float
    uncontrolled: float
    controlled: float
    eta: float
    improvement: float
    direction: int


@dataclass(frozen=True)
class ComparisonTable:
    """Day-sampled comparison of one observed series with two simulations."""

    series: str
    rows: tuple

    def __post_init__(self):
        if self.series not in SERIES_COLUMNS:
            raise ValueError(f"unknown series {self.series!r}, expected one of Q, R, D")
        object.__setattr__(self, "rows", tuple(self.rows))
        for row in self.rows:
            if row.eta < 0 or row.improvement < 0:
                raise ValueError("percentages must be nonnegative")
        dates = [row.date for row in self.rows]
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise ValueError("rows must be strictly date-ordered")


def _observed_at(series: ObservedSeries, column: str, date: _dt.date) -> float:
    offset = (date - series.dates[0]).days
    if offset < 0 or offset >= len(series.dates) or series.dates[offset] != date:
        raise ValueError(f"date {date} not covered by the observed series")
    return float(getattr(series, column)[offset])


def build_table(
    series_name: str,
    real: ObservedSeries,
    uncontrolled: Trajectory,
    controlled: Trajectory,
    sample_dates,
) -> ComparisonTable:
    """Assemble a comparison table for one series at the given dates.

    Simulated values are interpolated at t = (date - first observed date)
    in days, so both trajectories must start at the first observed date.
    Percentages are computed from the unrounded interpolated values.
    """
    col = SERIES_COLUMNS[series_name]
    attr = series_name.lower()
    rows = []
    for date in sample_dates:
        t = float((date - real.dates[0]).days)
        obs = _observed_at(real, attr, date)
        unc = float(uncontrolled.at(t)[col])
        con = float(controlled.at(t)[col])
        eta = relative_error(obs, unc)
        imp = improvement(obs, con)
        rows.append(TableRow(date, obs, unc, con, eta, imp.percent, imp.direction))
    return ComparisonTable(series_name, tuple(rows))


def render_text(table: ComparisonTable) -> str:
    """Aligned plain-text rendering: day-of-month labels, display rounding."""
    header = (
        "day",
        "real",
        "model-unc",
        "model-con",
        f"eta_{table.series}%",
        f"imp_{table.series}%",
    )
    body = [
        (
            f"{row.date.day:02d}",
            format_count(row.real),
            format_count(row.uncontrolled),
            format_count(row.controlled),
            format_percent(row.eta),
            format_percent(row.improvement),
        )
        for row in table.rows
    ]
    widths = [
        max(len(header[i]), *(len(line[i]) for line in body)) if body else len(header[i])
        for i in range(len(header))
    ]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths))]
    for line in body:
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(line, widths)))
    return "\n".join(lines) + "\n"


def write_table_csv(table: ComparisonTable, path) -> None:
    """CSV export with full-precision values plus the improvement direction."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["date", "real", "uncontrolled", "controlled",
             "eta_pct", "improvement_pct", "direction"]
        )
        for row in table.rows:
            writer.writerow(
                [
                    row.date.isoformat(),
                    format_count(row.real),
                    repr(row.uncontrolled),
                    repr(row.controlled),
                    repr(row.eta),
                    repr(row.improvement),
                    row.direction,
                ]
            )
