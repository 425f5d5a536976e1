"""Two-stage grid-search calibration against synthetic reported data.

Generates "reported" series from a truth run at a known infection
coefficient, then recovers it with a coarse two-parameter grid search over
the coefficient and the initial dark figure.

Run:  python demos/07_calibration.py   (a few minutes on two cores)
"""

import numpy as np

from tripsim.calibrate import FitDim, FitSpace, grid_search, weighted_mse
from tripsim.cli import reported_triple, simulated_triple
from tripsim.engine import simulate
from tripsim.scenario_io import (ReportedData, SynthSpec, build_synthetic_world,
                                 default_parameters, init_from_reports)

TRUTH_LAMBDA = 1.596
TRUTH_DARK = 2.5
DAYS = 25


def prehistory():
    days = np.arange(-14, 0)
    cases = np.zeros((len(days), 6))
    cases[:, 3] = np.linspace(0, 40, len(days))
    return ReportedData(days=days, cum_cases=cases, icu=np.zeros(len(days)),
                        cum_deaths=np.zeros(len(days)))


def build(lambda_value, dark, reports, seed):
    params = default_parameters()
    params.transmission.infection_coefficient = lambda_value
    world = build_synthetic_world(SynthSpec(n_agents=2000), 42, seed, params=params)
    init_from_reports(world, reports, dark_figure=dark)
    return world


def make_reported():
    pre = prehistory()
    result = simulate(build(TRUTH_LAMBDA, TRUTH_DARK, pre, seed=17), days=DAYS)
    detected = np.zeros((DAYS, 6))
    for t, value, group in result.series["detected_cum"]:
        detected[t // 24, int(group)] = value
    return ReportedData(
        days=np.concatenate([pre.days, np.arange(DAYS)]),
        cum_cases=np.maximum.accumulate(np.vstack([pre.cum_cases, detected]), axis=0),
        icu=np.concatenate([pre.icu, result.daily("icu_occupancy")]),
        cum_deaths=np.concatenate([pre.cum_deaths, result.daily("deaths_cum")]))


REPORTED = make_reported()


def objective(params: dict, seed: int) -> float:
    world = build(params["infection_coefficient"], params["dark_figure"], REPORTED, seed)
    result = simulate(world, days=DAYS)
    return weighted_mse(simulated_triple(result, DAYS), reported_triple(REPORTED, DAYS))


if __name__ == "__main__":
    space = FitSpace((FitDim("infection_coefficient", 0.8, 3.2, 3),
                      FitDim("dark_figure", 1.0, 4.0, 3)))
    fit = grid_search(objective, space, runs_per_point=3, master_seed=1, workers=2)
    print(f"truth: lambda={TRUTH_LAMBDA} dark={TRUTH_DARK}")
    print(f"best fit: lambda={fit.best_params['infection_coefficient']:.3f} "
          f"dark={fit.best_params['dark_figure']:.2f} (mse {fit.best_score:.1f})")
    for params, score in fit.ranked()[:5]:
        print(f"  lambda={params['infection_coefficient']:.3f} "
              f"dark={params['dark_figure']:.2f} -> {score:.1f}")
