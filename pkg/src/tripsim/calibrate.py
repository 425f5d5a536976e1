"""Weighted-MSE objective and two-stage exhaustive grid search.

Stage one scores every point of the full product grid, averaging the
objective over a fixed number of seeded runs per point. Stage two refines
around the best points: per dimension, six values spanning +-5% of the
stage-one value, plus the stage-one point itself as an extra candidate.
Seeds derive deterministically from (master seed, stage, point index, run
index), so repeated searches with the same master seed agree exactly for
any worker count.
"""

from __future__ import annotations

import csv
import itertools
import multiprocessing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import rng as _rng

#: objective weights for (cumulative deaths, daily ICU, cumulative detected)
DEFAULT_WEIGHTS = (10000.0, 1000.0, 3.0)


@dataclass(frozen=True)
class FitDim:
    name: str
    low: float
    high: float
    points: int = 6

    def __post_init__(self):
        if self.high <= self.low:
            raise ValueError(f"{self.name}: interval must be non-degenerate")
        if self.points < 2:
            raise ValueError(f"{self.name}: need at least 2 grid points")

    def values(self) -> np.ndarray:
        return np.linspace(self.low, self.high, self.points)


@dataclass
class FitSpace:
    dims: tuple

    def __post_init__(self):
        self.dims = tuple(self.dims)
        if not self.dims:
            raise ValueError("fit space needs at least one dimension")

    def grid(self) -> list[dict]:
        axes = [d.values() for d in self.dims]
        names = [d.name for d in self.dims]
        return [dict(zip(names, combo)) for combo in itertools.product(*axes)]

    def refined_grid(self, center: dict, fraction: float = 0.05, points: int = 6) -> list[dict]:
        """Sub-grid around a center point, center vector included."""
        axes = []
        names = [d.name for d in self.dims]
        for d in self.dims:
            x = center[d.name]
            axes.append(np.linspace(x * (1 - fraction), x * (1 + fraction), points))
        out = [dict(zip(names, combo)) for combo in itertools.product(*axes)]
        out.append(dict(center))
        return out


@dataclass(frozen=True)
class Objective:
    """Weights for the (deaths, ICU, detected) weighted mean squared error."""

    weights: tuple = DEFAULT_WEIGHTS

    def __post_init__(self):
        if len(self.weights) != 3 or any(w <= 0 for w in self.weights):
            raise ValueError("need three positive weights")


def weighted_mse(sim: Sequence[np.ndarray], reported: Sequence[np.ndarray],
                 weights: Sequence[float] = DEFAULT_WEIGHTS) -> float:
    """sum_k w_k * mean((sim_k - reported_k)^2) over the series triple."""
    if len(sim) != len(reported) or len(sim) != len(weights):
        raise ValueError("need matching triples")
    total = 0.0
    for s, r, w in zip(sim, reported, weights):
        s = np.asarray(s, dtype=np.float64)
        r = np.asarray(r, dtype=np.float64)
        if s.shape != r.shape:
            raise ValueError(f"series length mismatch: {s.shape} vs {r.shape}")
        total += w * float(np.mean((s - r) ** 2))
    return total


@dataclass
class GridSearchResult:
    best_params: dict
    best_score: float
    stage1: list = field(default_factory=list)  # (params, score) sorted ascending
    stage2: list = field(default_factory=list)

    def ranked(self) -> list:
        return sorted(self.stage1 + self.stage2, key=lambda ps: ps[1])


def _point_job(args):
    evaluate, stage, pidx, params, seeds = args
    scores = []
    for seed in seeds:
        try:
            scores.append(float(evaluate(params, seed)))
        except Exception:
            scores.append(float("inf"))
    return stage, pidx, float(np.mean(scores))


def _score_points(evaluate, points: list[dict], runs_per_point: int, master_seed: int,
                  stage: int, workers: int) -> list[float]:
    jobs = []
    for pidx, params in enumerate(points):
        seeds = [_rng.derive_run_key(master_seed, (stage * 1_000_003 + pidx) * runs_per_point + r)
                 for r in range(runs_per_point)]
        jobs.append((evaluate, stage, pidx, params, seeds))
    scores = [float("inf")] * len(points)
    if workers > 1 and len(jobs) > 1:
        with multiprocessing.get_context("fork").Pool(workers) as pool:
            for _stage, pidx, score in pool.imap_unordered(_point_job, jobs):
                scores[pidx] = score
    else:
        for job in jobs:
            _stage, pidx, score = _point_job(job)
            scores[pidx] = score
    return scores


def _params_key(params: dict) -> tuple:
    return tuple(params[k] for k in sorted(params))


def grid_search(evaluate: Callable[[dict, int], float], space: FitSpace,
                runs_per_point: int = 11, master_seed: int = 0, top_k: int = 3,
                refine_fraction: float = 0.05, refine_points: int = 6,
                workers: int = 1, out_csv=None) -> GridSearchResult:
    """Two-stage exhaustive search minimizing the mean of seeded evaluations.

    ``evaluate(params, seed)`` returns the objective for one simulation run
    (picklable for workers > 1); a failing run scores infinite. Ties break
    on lexicographic parameter order.
    """
    points = space.grid()
    scores = _score_points(evaluate, points, runs_per_point, master_seed, 0, workers)
    stage1 = sorted(zip(points, scores), key=lambda ps: (ps[1], _params_key(ps[0])))

    stage2 = []
    for params, _score in stage1[:top_k]:
        refined = space.refined_grid(params, refine_fraction, refine_points)
        r_scores = _score_points(evaluate, refined, runs_per_point, master_seed, 1, workers)
        stage2.extend(zip(refined, r_scores))
    stage2.sort(key=lambda ps: (ps[1], _params_key(ps[0])))

    candidates = stage1[:top_k] + stage2
    best_params, best_score = min(candidates, key=lambda ps: (ps[1], _params_key(ps[0])))
    result = GridSearchResult(best_params=dict(best_params), best_score=best_score,
                              stage1=stage1, stage2=stage2)
    if out_csv is not None:
        write_ranked_csv(out_csv, result)
    return result


def write_ranked_csv(path, result: GridSearchResult) -> None:
    ranked = result.ranked()
    names = sorted(ranked[0][0]) if ranked else []
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names + ["mean_mse"])
        for params, score in ranked:
            writer.writerow([format(float(params[n]), ".10g") for n in names]
                            + [format(float(score), ".10g")])


# -- wiring fits into parameter sets ----------------------------------------------

import dataclasses as _dc


def _set_quarantine(p, **kw):
    p.quarantine = _dc.replace(p.quarantine, **kw)


#: supported fit/sweep dimensions and how they map into a ParameterSet
FIT_SETTERS = {
    "infection_coefficient": lambda p, v: setattr(p.transmission, "infection_coefficient", v),
    "dark_figure": lambda p, v: setattr(p, "dark_figure", v),
    "contact_reduction_lockdown": lambda p, v: setattr(p.policy, "contact_reduction_lockdown", v),
    "p_symptomatic": lambda p, v: setattr(p.testing, "p_symptomatic", v),
    "ratio_nonsymptomatic": lambda p, v: setattr(p.testing, "ratio_nonsymptomatic", v),
    "quarantine_length": lambda p, v: _set_quarantine(p, length_days=v),
    "quarantine_efficiency": lambda p, v: _set_quarantine(p, efficiency=v),
}


def apply_fit_params(params, values: dict) -> None:
    """Write fitted values into a ParameterSet in place."""
    for name, value in values.items():
        try:
            FIT_SETTERS[name](params, float(value))
        except KeyError:
            raise ValueError(f"unknown fit dimension {name!r}") from None
