"""Reproduction-number estimation, aggregated endpoints, parameter sweeps.

The instantaneous reproduction number divides recent incidence by the
expected infectious "pressure" in the window: every agent whose shedding
support overlaps the window contributes the fraction of its lifetime shed
that falls inside the window. Shed integrals come in closed form from the
piecewise-linear log viral load under the logistic link:

    integral of sigmoid(alpha + beta*v(tau)) dtau
        = softplus(alpha + beta*v(tau)) / (beta * slope)  per linear piece.

Summed over consecutive windows covering an agent's whole support the
contributions telescope to exactly 1.
"""

from __future__ import annotations

import csv
import multiprocessing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .core import HOURS_PER_DAY, World
from .engine import RunResult
from .infection import Infection, InfectionState, ViralCurve


def _softplus(x: float) -> float:
    if x > 30.0:
        return x + np.log1p(np.exp(-x))
    return float(np.log1p(np.exp(x)))


def shed_integral(curve: ViralCurve, a: float, b: float) -> float:
    """Closed-form integral of the shed rate over [a, b] (curve support only)."""
    a = max(a, curve.t_transmission)
    b = min(b, curve.t_clear)
    if b <= a:
        return 0.0
    total = 0.0
    alpha, beta = curve.alpha, curve.beta
    t_peak = curve.t_peak
    lo, hi = a, min(b, t_peak)
    if hi > lo:
        k = beta * curve.incline

        def v_up(t):
            return (t - curve.t_transmission) * curve.incline

        total += (_softplus(alpha + beta * v_up(hi)) - _softplus(alpha + beta * v_up(lo))) / k
    lo, hi = max(a, t_peak), b
    if hi > lo:
        k = beta * curve.decline

        def v_down(t):
            return curve.peak + (t - t_peak) * curve.decline

        total += (_softplus(alpha + beta * v_down(hi)) - _softplus(alpha + beta * v_down(lo))) / k
    return curve.shed_factor * total


def window_shed_fraction(infection: Infection, a: float, b: float) -> float:
    """Share of the infection's total shed emitted within [a, b].

    Uses the state-cut shedding support (from leaving Exposed to the earlier
    of clearance and recovery/death); returns 0 for a degenerate support.
    """
    w0, w1 = infection.infectious_window()
    lifetime = shed_integral(infection.curve, w0, w1)
    if lifetime <= 0.0:
        return 0.0
    return shed_integral(infection.curve, max(a, w0), min(b, w1)) / lifetime


def estimate_rt(world: World, t: float, dt: float) -> Optional[float]:
    """Instantaneous reproduction number over [t - dt, t).

    Numerator: infections transmitted in the window. Denominator: summed
    window shed fractions of agents infectious during the window. Returns
    None when the denominator is zero.
    """
    a, b = t - dt, t
    incidence = 0
    pressure = 0.0
    for infection in world.pop.infection:
        if infection is None:
            continue
        if a <= infection.curve.t_transmission < b:
            incidence += 1
        w0, w1 = infection.infectious_window()
        if w0 < b and w1 > a:
            pressure += window_shed_fraction(infection, a, b)
    if pressure <= 0.0:
        return None
    return incidence / pressure


def rt_series(world: World, t_end: float, window_days: float = 1.0,
              t_start: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Daily-windowed Rt over the run; NaN where undefined."""
    times = np.arange(t_start + window_days, t_end + 1e-9, window_days)
    values = np.full(times.shape, np.nan)
    for i, t in enumerate(times):
        rt = estimate_rt(world, float(t), window_days)
        if rt is not None:
            values[i] = rt
    return times, values


# -- aggregated endpoints --------------------------------------------------------


@dataclass
class RunOutcome:
    """Four scalar endpoints plus corrected severity series."""

    cumulative_infections: float
    cumulative_deaths: float
    max_hospitalized: float
    max_hourly_infections: float
    series: dict = field(default_factory=dict)

    ENDPOINTS = ("cumulative_infections", "cumulative_deaths",
                 "max_hospitalized", "max_hourly_infections")


def _state_series(result: RunResult, state: InfectionState) -> np.ndarray:
    rows = result.series["state_counts"]
    return np.array([r[1] for r in rows if r[2] == state.name], dtype=np.float64)


def aggregate(result: RunResult, critical_inflation: float = 1.0) -> RunOutcome:
    """Extract the four endpoints from one run's logger output.

    ``critical_inflation`` reverses the artificial increase of the critical
    branch used so that all deaths pass through ICU: the reported critical
    series is the simulated one divided by the factor, the excess moving
    back into the severe series (their sum, hospitalization, is unchanged).
    """
    if critical_inflation < 1.0:
        raise ValueError("critical inflation factor must be >= 1")
    sus = _state_series(result, InfectionState.SUSCEPTIBLE)
    cumulative_infections = float(sus[0] - sus[-1]) if len(sus) else 0.0
    _, deaths = result.as_arrays("deaths_cum")
    _, hosp = result.as_arrays("hospitalized")
    _, hourly = result.as_arrays("infections_hourly")
    severe = _state_series(result, InfectionState.SEVERE)
    critical = _state_series(result, InfectionState.CRITICAL)
    corrected_critical = critical / critical_inflation
    corrected_severe = severe + critical - corrected_critical
    return RunOutcome(
        cumulative_infections=cumulative_infections,
        cumulative_deaths=float(deaths[-1]) if len(deaths) else 0.0,
        max_hospitalized=float(hosp.max()) if len(hosp) else 0.0,
        max_hourly_infections=float(hourly.max()) if len(hourly) else 0.0,
        series={"severe_corrected": corrected_severe, "critical_corrected": corrected_critical},
    )


def mean_outcome(outcomes: Sequence[RunOutcome]) -> RunOutcome:
    """Ensemble mean of the four endpoints (order-independent)."""
    return RunOutcome(
        cumulative_infections=float(np.mean([o.cumulative_infections for o in outcomes])),
        cumulative_deaths=float(np.mean([o.cumulative_deaths for o in outcomes])),
        max_hospitalized=float(np.mean([o.max_hospitalized for o in outcomes])),
        max_hourly_infections=float(np.mean([o.max_hourly_infections for o in outcomes])),
    )


# -- two-parameter sweeps ---------------------------------------------------------


def _sweep_job(args):
    builder, i, j, x, y, run_idx, seed = args
    try:
        return i, j, run_idx, builder(x, y, run_idx, seed), None
    except Exception as exc:  # surfaced per cell, siblings continue
        return i, j, run_idx, None, repr(exc)


def sweep(builder: Callable[[float, float, int, int], RunOutcome],
          xs: Sequence[float], ys: Sequence[float], runs: int,
          master_seed: int = 0, workers: int = 1) -> dict:
    """Ensemble-mean endpoint matrices over a 2-parameter grid.

    ``builder(x, y, run_idx, seed)`` simulates one run at grid point (x, y)
    and returns its RunOutcome; it must be picklable for workers > 1.
    Matrices are indexed [j, i] = (y row, x column), matching axis order of
    the printed heatmaps. Results are deterministic in the master seed.
    """
    from . import rng as _rng

    xs, ys = list(xs), list(ys)
    if not xs or not ys:
        raise ValueError("grids must be non-empty")
    jobs = []
    for j, y in enumerate(ys):
        for i, x in enumerate(xs):
            for r in range(runs):
                seed = _rng.derive_run_key(master_seed, (j * len(xs) + i) * runs + r)
                jobs.append((builder, i, j, x, y, r, seed))
    gathered: dict = {}
    errors: dict = {}
    if workers > 1 and len(jobs) > 1:
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            for i, j, r, outcome, err in pool.imap_unordered(_sweep_job, jobs):
                if err is None:
                    gathered.setdefault((i, j), {})[r] = outcome
                else:
                    errors[(i, j, r)] = err
    else:
        for job in jobs:
            i, j, r, outcome, err = _sweep_job(job)
            if err is None:
                gathered.setdefault((i, j), {})[r] = outcome
            else:
                errors[(i, j, r)] = err

    matrices = {name: np.full((len(ys), len(xs)), np.nan) for name in RunOutcome.ENDPOINTS}
    for (i, j), by_run in gathered.items():
        outcomes = [by_run[r] for r in sorted(by_run)]
        mean = mean_outcome(outcomes)
        for name in RunOutcome.ENDPOINTS:
            matrices[name][j, i] = getattr(mean, name)
    matrices["errors"] = errors
    matrices["xs"] = np.asarray(xs, dtype=np.float64)
    matrices["ys"] = np.asarray(ys, dtype=np.float64)
    return matrices


def write_matrix_csv(path, matrix: np.ndarray, xs: Sequence[float], ys: Sequence[float],
                     x_name: str = "x", y_name: str = "y") -> None:
    """Matrix CSV with axis headers: first column y values, first row x values."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"{y_name}\\{x_name}"] + [format(float(x), ".10g") for x in xs])
        for j, y in enumerate(ys):
            writer.writerow([format(float(y), ".10g")]
                            + [format(float(v), ".10g") for v in matrix[j]])


def read_matrix_csv(path) -> tuple[np.ndarray, np.ndarray, np.ndarray, str, str]:
    """Inverse of write_matrix_csv: (matrix, xs, ys, x_name, y_name)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    corner = rows[0][0]
    y_name, x_name = corner.split("\\") if "\\" in corner else ("y", "x")
    xs = np.array([float(v) for v in rows[0][1:]])
    ys = np.array([float(r[0]) for r in rows[1:]])
    matrix = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    if matrix.ndim != 2 or any(len(r) - 1 != len(xs) for r in rows[1:]):
        raise ValueError("ragged matrix CSV")
    return matrix, xs, ys, x_name, y_name


def write_outcomes_csv(path, matrices: dict, x_name: str, y_name: str) -> None:
    base = Path(path)
    base.mkdir(parents=True, exist_ok=True)
    for name in RunOutcome.ENDPOINTS:
        write_matrix_csv(base / f"{name}.csv", matrices[name],
                         matrices["xs"], matrices["ys"], x_name, y_name)
