"""Readers for the simulation engine's documented CSV schemas.

This package talks to the engine only through files:

* percentile summaries ``<name>_summary.csv`` with columns
  time,p5,p25,p50,p75,p95 (time in hours);
* endpoint matrices with axis headers (first cell ``yname\\xname``, first
  row the x values, first column the y values);
* reported data ``reported.csv`` with columns day, cases_a0..cases_a5,
  icu, deaths.

Lines starting with '#' are comments and skipped.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

PERCENTILES = ("p5", "p25", "p50", "p75", "p95")


@dataclass
class SeriesBundle:
    """One panel's data: percentile bands, optional overlay, event markers."""

    name: str
    time_days: np.ndarray
    bands: dict
    reported: Optional[tuple] = None  # (time_days, values)
    markers: tuple = ()

    def __post_init__(self):
        lengths = {len(self.bands[p]) for p in PERCENTILES}
        if lengths != {len(self.time_days)}:
            raise ValueError(f"{self.name}: band lengths do not match the time axis")
        self.validate_ordering()

    def validate_ordering(self) -> None:
        """Percentile bands must be ordered pointwise."""
        for lo, hi in zip(PERCENTILES, PERCENTILES[1:]):
            if not (self.bands[lo] <= self.bands[hi] + 1e-12).all():
                raise ValueError(f"{self.name}: {lo} exceeds {hi} somewhere")


def _rows(path):
    with open(path, newline="") as fh:
        yield from csv.reader(line for line in fh if not line.startswith("#"))


def read_summary_csv(path, name: Optional[str] = None, markers=()) -> SeriesBundle:
    path = Path(path)
    rows = list(_rows(path))
    header = rows[0]
    if header[:1] != ["time"] or set(PERCENTILES) - set(header):
        raise ValueError(f"{path}: expected columns time,p5,p25,p50,p75,p95")
    idx = {col: header.index(col) for col in PERCENTILES}
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    time_days = data[:, 0] / 24.0
    bands = {p: data[:, idx[p]] for p in PERCENTILES}
    stem = name if name is not None else path.stem.replace("_summary", "")
    return SeriesBundle(name=stem, time_days=time_days, bands=bands, markers=tuple(markers))


def read_matrix_csv(path):
    """(matrix, xs, ys, x_name, y_name) from an axis-headed matrix CSV."""
    rows = list(_rows(path))
    corner = rows[0][0]
    y_name, x_name = corner.split("\\") if "\\" in corner else ("y", "x")
    xs = np.array([float(v) for v in rows[0][1:]])
    body = rows[1:]
    if any(len(r) != len(rows[0]) for r in body):
        raise ValueError(f"{path}: ragged matrix")
    ys = np.array([float(r[0]) for r in body])
    matrix = np.array([[float(v) for v in r[1:]] for r in body])
    return matrix, xs, ys, x_name, y_name


def read_reported_csv(path) -> dict:
    """Reported series keyed like the engine's summary names."""
    rows = list(_rows(path))
    header = rows[0]
    col = {name: header.index(name) for name in header}
    days, cases, icu, deaths = [], [], [], []
    for row in rows[1:]:
        days.append(float(row[col["day"]]))
        cases.append(sum(float(row[col[f"cases_a{g}"]]) for g in range(6)))
        icu.append(float(row[col["icu"]]))
        deaths.append(float(row[col["deaths"]]))
    days = np.array(days)
    cases = np.array(cases)
    out = {
        "deaths_cum": (days, np.array(deaths)),
        "icu_occupancy": (days, np.array(icu)),
        "detected_cum": (days, cases),
    }
    if len(days) > 1:
        out["detected_new"] = (days[1:], np.diff(cases))
    return out
