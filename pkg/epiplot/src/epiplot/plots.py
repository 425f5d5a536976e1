"""Rendering: percentile-band time series panels and endpoint heatmap grids.

Rendering never modifies inputs; every function takes loaded data plus
style options and writes one image file.
"""

from __future__ import annotations

import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import PERCENTILES, SeriesBundle, read_matrix_csv, read_reported_csv, read_summary_csv

#: the four standard panels of a fitted-scenario figure, in layout order
DEFAULT_PANELS = ("deaths_cum", "detected_cum", "icu_occupancy", "detected_new")

#: the four aggregated endpoints of a sweep figure, in layout order
ENDPOINT_PANELS = ("cumulative_infections", "cumulative_deaths",
                   "max_hospitalized", "max_hourly_infections")

_TITLES = {
    "deaths_cum": "Cumulative deaths",
    "detected_cum": "Cumulative detected infections",
    "icu_occupancy": "ICU occupancy",
    "detected_new": "Newly detected infections",
    "infections_hourly": "New infections per step",
    "cumulative_infections": "Cumulative infections",
    "cumulative_deaths": "Deaths",
    "max_hospitalized": "Maximum hospitalized",
    "max_hourly_infections": "Maximum hourly infections",
}


def _draw_bundle(ax, bundle: SeriesBundle) -> None:
    t = bundle.time_days
    ax.fill_between(t, bundle.bands["p5"], bundle.bands["p95"],
                    color="#2a6fdb", alpha=0.15, linewidth=0, label="p5-p95")
    ax.fill_between(t, bundle.bands["p25"], bundle.bands["p75"],
                    color="#2a6fdb", alpha=0.35, linewidth=0, label="p25-p75")
    ax.plot(t, bundle.bands["p50"], color="#1d4ed8", linewidth=1.6, label="median")
    if bundle.reported is not None:
        rt, rv = bundle.reported
        ax.plot(rt, rv, color="#d62728", linewidth=1.2, label="reported")
    for marker in bundle.markers:
        ax.axvline(marker, color="0.35", linestyle="--", linewidth=0.9)
    ax.set_title(_TITLES.get(bundle.name, bundle.name))
    ax.set_xlabel("day")
    ax.margins(x=0)


def plot_timeseries(bundles, out_path, suptitle: str = "") -> Path:
    """Render one panel per bundle (2-column grid) into ``out_path``."""
    bundles = list(bundles)
    if not bundles:
        raise ValueError("nothing to plot")
    for bundle in bundles:
        bundle.validate_ordering()
    ncols = 1 if len(bundles) == 1 else 2
    nrows = (len(bundles) + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(6.0 * ncols, 3.4 * nrows), squeeze=False)
    for ax in axes.flat[len(bundles):]:
        ax.set_visible(False)
    for ax, bundle in zip(axes.flat, bundles):
        _draw_bundle(ax, bundle)
    axes.flat[0].legend(loc="upper left", fontsize=8)
    if suptitle:
        fig.suptitle(suptitle)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def load_run_dir(run_dir, panels=DEFAULT_PANELS, reported_csv=None, markers=()):
    """Bundles for a run directory's ``<name>_summary.csv`` files.

    A missing reported file degrades to plots without the overlay, with a
    warning; missing summary files are skipped the same way.
    """
    run_dir = Path(run_dir)
    overlays = {}
    if reported_csv is not None:
        reported_csv = Path(reported_csv)
        if reported_csv.exists():
            overlays = read_reported_csv(reported_csv)
        else:
            warnings.warn(f"reported file {reported_csv} not found; plotting without overlay")
    bundles = []
    for name in panels:
        path = run_dir / f"{name}_summary.csv"
        if not path.exists():
            warnings.warn(f"summary {path.name} not found in {run_dir}; panel skipped")
            continue
        bundle = read_summary_csv(path, markers=markers)
        if name in overlays:
            bundle.reported = overlays[name]
        bundles.append(bundle)
    if not bundles:
        raise FileNotFoundError(f"no *_summary.csv files under {run_dir}")
    return bundles


def plot_heatmap(matrix_csv, out_path) -> Path:
    """Endpoint heatmap panels; sibling endpoint files form a 2x2 grid.

    When the given matrix lives next to the other standard endpoint files
    they are rendered together (one panel each); otherwise the single
    matrix gets a single panel.
    """
    matrix_csv = Path(matrix_csv)
    siblings = [matrix_csv.parent / f"{name}.csv" for name in ENDPOINT_PANELS]
    if matrix_csv in siblings and all(p.exists() for p in siblings):
        paths = siblings
    else:
        paths = [matrix_csv]
    ncols = 1 if len(paths) == 1 else 2
    nrows = (len(paths) + ncols - 1) // ncols
    fig, axes = plt.subplots(nrows, ncols, figsize=(5.2 * ncols, 4.0 * nrows), squeeze=False)
    for ax in axes.flat[len(paths):]:
        ax.set_visible(False)
    for ax, path in zip(axes.flat, paths):
        matrix, xs, ys, x_name, y_name = read_matrix_csv(path)
        image = ax.imshow(matrix, origin="lower", aspect="auto", cmap="viridis")
        ax.set_xticks(range(len(xs)), [f"{x:g}" for x in xs])
        ax.set_yticks(range(len(ys)), [f"{y:g}" for y in ys])
        ax.set_xlabel(x_name)
        ax.set_ylabel(y_name)
        ax.set_title(_TITLES.get(path.stem, path.stem))
        for j in range(matrix.shape[0]):
            for i in range(matrix.shape[1]):
                ax.text(i, j, f"{matrix[j, i]:.3g}", ha="center", va="center",
                        color="white", fontsize=8)
        fig.colorbar(image, ax=ax, shrink=0.85)
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path
