"""Ingestion of the Italian regional COVID-19 CSV feed.

The feed publishes one row per region per day.  Column mapping used here:
``data`` (timestamp) -> date, ``codice_regione`` -> region code,
``ricoverati_con_sintomi`` -> hospitalized with symptoms,
``totale_positivi`` -> Q, ``dimessi_guariti`` -> R, ``deceduti`` -> D.
The library never fetches over the network; inputs are local files or
streams (see scripts/fetch_regional_data.py for a documented downloader).
"""

from __future__ import annotations

import csv
import datetime as dt
import io
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DataFormatError

COLUMN_MAP = {
    "date": "data",
    "region": "codice_regione",
    "hospitalized": "ricoverati_con_sintomi",
    "positives": "totale_positivi",
    "recovered": "dimessi_guariti",
    "deceased": "deceduti",
}


class RegionalRecord(NamedTuple):
    """One region-day row of the feed."""

    date: dt.date
    region: int
    hospitalized: int
    positives: int
    recovered: int
    deceased: int


@dataclass(frozen=True)
class ObservedSeries:
    """Daily national Q, R, D counts on a gap-free, increasing date range."""

    dates: tuple
    q: np.ndarray
    r: np.ndarray
    d: np.ndarray

    def __post_init__(self):
        dates = tuple(self.dates)
        object.__setattr__(self, "dates", dates)
        for name in ("q", "r", "d"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (len(dates),):
                raise ValueError(f"{name} length {arr.shape} != {len(dates)} dates")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        for a, b in zip(dates, dates[1:]):
            if b <= a:
                raise ValueError(f"dates not strictly increasing at {a} -> {b}")

    def __len__(self) -> int:
        return len(self.dates)

    def day_offsets(self) -> np.ndarray:
        """Days elapsed since the first date, one entry per observation."""
        first = self.dates[0]
        return np.array([(day - first).days for day in self.dates], dtype=float)


def _parse_date(text: str) -> dt.date:
    # The feed carries ISO timestamps like 2020-09-01T17:00:00.
    return dt.date.fromisoformat(text.strip()[:10])


def _parse_count(text: str) -> int:
    v = int(text.strip())
    if v < 0:
        raise ValueError(f"negative count {v}")
    return v


def parse_regional_csv(source) -> list[RegionalRecord]:
    """Parse the regional feed from a path, text stream, or byte stream.

    Unknown extra columns are ignored.  Rows with unparseable mandatory
    fields are collected and reported together with their line numbers.
    """
    if hasattr(source, "read"):
        text = source.read()
        if isinstance(text, bytes):
            text = text.decode("utf-8")
    else:
        with open(source, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()

    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames is None:
        raise DataFormatError("empty input: no header row")
    missing = [col for col in COLUMN_MAP.values() if col not in reader.fieldnames]
    if missing:
        raise DataFormatError(f"header is missing required columns: {missing}")

    records = []
    bad_rows = []
    for line, row in enumerate(reader, start=2):
        try:
            records.append(
                RegionalRecord(
                    date=_parse_date(row[COLUMN_MAP["date"]]),
                    region=int(row[COLUMN_MAP["region"]].strip()),
                    hospitalized=_parse_count(row[COLUMN_MAP["hospitalized"]]),
                    positives=_parse_count(row[COLUMN_MAP["positives"]]),
                    recovered=_parse_count(row[COLUMN_MAP["recovered"]]),
                    deceased=_parse_count(row[COLUMN_MAP["deceased"]]),
                )
            )
        except (ValueError, TypeError, KeyError) as exc:
            bad_rows.append((line, str(exc)))
    if bad_rows:
        shown = "; ".join(f"line {line}: {msg}" for line, msg in bad_rows[:5])
        raise DataFormatError(
            f"{len(bad_rows)} malformed row(s), first: {shown}"
        )
    return records


def aggregate_national(
    records, window: tuple[dt.date, dt.date]
) -> ObservedSeries:
    """Sum Q, R, D over regions for each day of the inclusive date window.

    Duplicate (day, region) pairs and days with no records are rejected.
    """
    start, end = window
    if end < start:
        raise ValueError(f"empty window: {start} .. {end}")
    seen = set()
    sums: dict[dt.date, list[int]] = {}
    for rec in records:
        if not (start <= rec.date <= end):
            continue
        key = (rec.date, rec.region)
        if key in seen:
            raise DataFormatError(f"duplicate record for region {rec.region} on {rec.date}")
        seen.add(key)
        acc = sums.setdefault(rec.date, [0, 0, 0])
        acc[0] += rec.positives
        acc[1] += rec.recovered
        acc[2] += rec.deceased
    n_days = (end - start).days + 1
    days = [start + dt.timedelta(days=i) for i in range(n_days)]
    gaps = [day for day in days if day not in sums]
    if gaps:
        shown = ", ".join(str(day) for day in gaps[:5])
        raise DataFormatError(f"{len(gaps)} day(s) without records in window: {shown}")
    q = [sums[day][0] for day in days]
    r = [sums[day][1] for day in days]
    d = [sums[day][2] for day in days]
    return ObservedSeries(dates=tuple(days), q=q, r=r, d=d)


def write_series_csv(series: ObservedSeries, path) -> None:
    """Write a national series as CSV with columns date, Q, R, D."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("date,Q,R,D\n")
        for i, day in enumerate(series.dates):
            fh.write(
                f"{day.isoformat()},{series.q[i]:.10g},{series.r[i]:.10g},{series.d[i]:.10g}\n"
            )


def read_series_csv(path) -> ObservedSeries:
    """Read a national series CSV written by write_series_csv."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError(f"{path}: empty file")
        if [c.strip() for c in header] != ["date", "Q", "R", "D"]:
            raise DataFormatError(f"{path}: expected header date,Q,R,D, got {header}")
        dates = []
        q, r, d = [], [], []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                dates.append(dt.date.fromisoformat(row[0].strip()))
                q.append(float(row[1]))
                r.append(float(row[2]))
                d.append(float(row[3]))
            except (ValueError, IndexError) as exc:
                raise DataFormatError(f"{path}: line {line}: {exc}") from exc
    if not dates:
        raise DataFormatError(f"{path}: no data rows")
    return ObservedSeries(dates=tuple(dates), q=q, r=r, d=d)
