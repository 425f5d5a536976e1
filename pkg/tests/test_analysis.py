"""Rt estimator (closed-form shed integrals vs quadrature), endpoints, sweeps."""

import numpy as np
import pytest
from scipy import integrate

from tripsim import engine
from tripsim.analysis import (RunOutcome, aggregate, estimate_rt, mean_outcome,
                              read_matrix_csv, shed_integral, sweep,
                              window_shed_fraction, write_matrix_csv)
from tripsim.infection import Infection, InfectionCourse, InfectionState, viral_shed
from tests.conftest import force_infection, make_world, plateau_curve


def quad_shed_integral(curve, a, b):
    val, err = integrate.quad(lambda t: float(viral_shed(curve, t)), a, b,
                              points=[curve.t_peak], limit=200)
    return val


class TestShedIntegral:
    def test_matches_quadrature(self):
        curve = plateau_curve(shed_factor=0.15)
        for a, b in [(0.0, curve.t_clear), (1.0, 6.0), (4.0, 4.1), (-5.0, 100.0),
                     (curve.t_peak, curve.t_clear)]:
            closed = shed_integral(curve, a, b)
            numeric = quad_shed_integral(curve, max(a, 0.0), min(b, curve.t_clear))
            assert closed == pytest.approx(numeric, rel=1e-6)

    def test_empty_interval_zero(self):
        curve = plateau_curve()
        assert shed_integral(curve, 5.0, 5.0) == 0.0
        assert shed_integral(curve, -3.0, -1.0) == 0.0

    def test_scales_with_shed_factor(self):
        a = shed_integral(plateau_curve(shed_factor=0.1), 0, 50)
        b = shed_integral(plateau_curve(shed_factor=0.2), 0, 50)
        assert b == pytest.approx(2 * a)


def make_infection(t0=0.0, infectious_from=1.0, recovered_at=None, shed_factor=0.2):
    curve = plateau_curve(t_transmission=t0, shed_factor=shed_factor)
    recovered_at = recovered_at if recovered_at is not None else curve.t_clear + 2.0
    course = InfectionCourse(
        states=(InfectionState.EXPOSED, InfectionState.NO_SYMPTOMS, InfectionState.RECOVERED),
        times=(t0, t0 + infectious_from, recovered_at))
    return Infection(variant="wild", curve=curve, course=course)


class TestWindowFractions:
    def test_lifetime_fractions_sum_to_one(self):
        inf = make_infection()
        w0, w1 = inf.infectious_window()
        edges = np.arange(np.floor(w0) - 2, np.ceil(w1) + 3, 1.0)
        total = sum(window_shed_fraction(inf, a, b) for a, b in zip(edges, edges[1:]))
        assert abs(total - 1.0) < 1e-6

    def test_full_support_fraction_is_one(self):
        inf = make_infection()
        w0, w1 = inf.infectious_window()
        assert window_shed_fraction(inf, w0 - 1, w1 + 1) == pytest.approx(1.0, abs=1e-9)

    def test_early_recovery_truncates_support(self):
        inf = make_infection(recovered_at=6.0)
        assert window_shed_fraction(inf, 6.0, 100.0) == 0.0
        assert window_shed_fraction(inf, 0.0, 6.0) == pytest.approx(1.0, abs=1e-9)


class TestEstimateRt:
    def test_single_infector_exact_ratio(self):
        world = make_world(n_homes=1, n_agents=4)
        infector = make_infection(t0=-5.0)
        world.register_infection(0, infector)
        world.sync_infection_state(0, 0.0)
        # two fresh transmissions inside the window [0, 1)
        for aid in (1, 2):
            world.register_infection(aid, make_infection(t0=0.5))
        w = window_shed_fraction(infector, 0.0, 1.0)
        new_fraction_1 = window_shed_fraction(world.pop.infection[1], 0.0, 1.0)
        new_fraction_2 = window_shed_fraction(world.pop.infection[2], 0.0, 1.0)
        rt = estimate_rt(world, 1.0, 1.0)
        assert rt == pytest.approx(2.0 / (w + new_fraction_1 + new_fraction_2))

    def test_zero_incidence_zero_rt(self):
        world = make_world(n_homes=1, n_agents=2)
        world.register_infection(0, make_infection(t0=-5.0))
        world.sync_infection_state(0, 0.0)
        assert estimate_rt(world, 1.0, 1.0) == 0.0

    def test_empty_denominator_absent(self):
        world = make_world(n_homes=1, n_agents=2)
        assert estimate_rt(world, 1.0, 1.0) is None

    def test_constructed_full_support_denominator_one(self):
        world = make_world(n_homes=1, n_agents=2)
        inf = make_infection(t0=0.0)
        world.register_infection(0, inf)
        world.sync_infection_state(0, 0.0)
        w0, w1 = inf.infectious_window()
        rt = estimate_rt(world, w1 + 0.5, w1 + 0.5)  # window covers everything
        assert rt == pytest.approx(1.0 / 1.0)  # its own transmission counted


class TestAggregate:
    def run_result(self):
        # one extreme shedder makes household transmission near-certain
        world = make_world(n_homes=2, n_agents=6)
        force_infection(world, 0, t_now=4.0, curve=plateau_curve(shed_factor=50.0))
        world.clock_hours = 4 * 24
        return engine.simulate(world, days=1)

    def test_endpoints_from_series(self):
        result = self.run_result()
        outcome = aggregate(result)
        assert outcome.cumulative_infections >= 1
        assert outcome.cumulative_deaths == 0
        assert outcome.max_hourly_infections >= 1

    def test_max_hourly(self):
        result = engine.RunResult(seed=0, series={
            "state_counts": [(0, 6, "SUSCEPTIBLE")],
            "deaths_cum": [(0, 0.0)],
            "hospitalized": [(0, 0.0)],
            "infections_hourly": [(0, 0.0), (1, 3.0), (2, 1.0), (3, 5.0), (4, 2.0)],
        }, columns={"state_counts": ("time", "value", "state"),
                    "deaths_cum": ("time", "value"),
                    "hospitalized": ("time", "value"),
                    "infections_hourly": ("time", "value")})
        assert aggregate(result).max_hourly_infections == 5.0

    def test_empty_epidemic_all_zero(self):
        world = make_world(n_homes=1, n_agents=3)
        outcome = aggregate(engine.simulate(world, days=1))
        assert outcome.cumulative_infections == 0
        assert outcome.cumulative_deaths == 0
        assert outcome.max_hospitalized == 0
        assert outcome.max_hourly_infections == 0

    def test_critical_correction_preserves_hospitalization(self):
        rows_sev = [(t, 10.0, "SEVERE") for t in range(3)]
        rows_crit = [(t, 4.0, "CRITICAL") for t in range(3)]
        rows_sus = [(t, 0.0, "SUSCEPTIBLE") for t in range(3)]
        result = engine.RunResult(seed=0, series={
            "state_counts": rows_sus + rows_sev + rows_crit,
            "deaths_cum": [(0, 0.0)], "hospitalized": [(0, 14.0)],
            "infections_hourly": [(0, 0.0)],
        }, columns={"state_counts": ("time", "value", "state"),
                    "deaths_cum": ("time", "value"),
                    "hospitalized": ("time", "value"),
                    "infections_hourly": ("time", "value")})
        outcome = aggregate(result, critical_inflation=2.0)
        assert np.allclose(outcome.series["critical_corrected"], 2.0)
        assert np.allclose(outcome.series["severe_corrected"], 12.0)
        assert np.allclose(outcome.series["severe_corrected"]
                           + outcome.series["critical_corrected"], 14.0)

    def test_order_independent_mean(self):
        outcomes = [RunOutcome(1, 2, 3, 4), RunOutcome(5, 6, 7, 8), RunOutcome(0, 0, 0, 0)]
        forward = mean_outcome(outcomes)
        backward = mean_outcome(outcomes[::-1])
        assert forward == backward


def _cell_outcome(x, y, run_idx, seed):
    return RunOutcome(cumulative_infections=x + y + seed % 3,
                      cumulative_deaths=x * y,
                      max_hospitalized=x, max_hourly_infections=y)


class TestSweep:
    def test_single_cell_is_ensemble_mean(self):
        m = sweep(_cell_outcome, [2.0], [3.0], runs=4, master_seed=1)
        outcomes = [_cell_outcome(2.0, 3.0, r, s) for r, s in enumerate(
            [__import__("tripsim.rng", fromlist=["derive_run_key"]).derive_run_key(1, r)
             for r in range(4)])]
        assert m["cumulative_infections"][0, 0] == pytest.approx(
            np.mean([o.cumulative_infections for o in outcomes]))

    def test_matrix_shape_and_orientation(self):
        m = sweep(_cell_outcome, [1.0, 2.0, 3.0], [10.0, 20.0], runs=1, master_seed=0)
        assert m["max_hospitalized"].shape == (2, 3)
        assert np.allclose(m["max_hospitalized"][0], [1.0, 2.0, 3.0])
        assert np.allclose(m["max_hourly_infections"][:, 0], [10.0, 20.0])

    def test_deterministic_given_master_seed(self):
        a = sweep(_cell_outcome, [1.0, 2.0], [3.0], runs=3, master_seed=5)
        b = sweep(_cell_outcome, [1.0, 2.0], [3.0], runs=3, master_seed=5, workers=2)
        for name in RunOutcome.ENDPOINTS:
            assert np.array_equal(a[name], b[name])

    def test_matrix_csv_round_trip(self, tmp_path):
        matrix = np.array([[1.5, 2.5], [3.5, 4.5]])
        write_matrix_csv(tmp_path / "m.csv", matrix, [0.1, 0.2], [10, 20], "p_s", "q_d")
        loaded, xs, ys, x_name, y_name = read_matrix_csv(tmp_path / "m.csv")
        assert np.array_equal(loaded, matrix)
        assert np.array_equal(xs, [0.1, 0.2]) and np.array_equal(ys, [10, 20])
        assert (x_name, y_name) == ("p_s", "q_d")
