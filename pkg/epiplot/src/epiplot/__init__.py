"""Plotting frontend for epidemic simulation CSV outputs.

Consumes only the engine's documented file formats: percentile summary
CSVs, endpoint matrix CSVs with axis headers, and reported-data CSVs.
"""

from .io import SeriesBundle, read_matrix_csv, read_reported_csv, read_summary_csv
from .plots import load_run_dir, plot_heatmap, plot_timeseries

__version__ = "0.1.0"

__all__ = ["SeriesBundle", "read_matrix_csv", "read_reported_csv", "read_summary_csv",
           "load_run_dir", "plot_heatmap", "plot_timeseries"]
