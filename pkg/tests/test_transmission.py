"""Shed aggregation, exposure, infection rates: worked-example oracle and
structural invariants."""

import copy

import numpy as np
import pytest

from tripsim import rng
from tripsim.core import AgeGroup, LocationType, MaskType, StepContext
from tripsim.infection import InfectionState
from tripsim.transmission import (exposure_rate, group_shed_vector, infection_rate,
                                  interact, local_shed_by_group, sample_transmission,
                                  split_other)
from tests.conftest import force_infection, make_world, plateau_curve

DT = 1.0 / 24.0


def worked_example_world(key=11):
    """Five same-age agents at one workplace: four infectious shedders with
    sheds {0.7, 0.9, 0.6, 0.8} and mask protections {0.8, 0.5, 0.9, 0.7};
    the susceptible receiver wears an 0.85-protection mask."""
    world = make_world(n_homes=5, n_agents=5, kinds=(LocationType.WORK,),
                       age=AgeGroup.AGE_35_59, key=key)
    work = world.extra_venues[LocationType.WORK]
    # mask indices 1..4 shed-side protections, index 5 the receiver's mask
    world.params.transmission.mask_transmit = (0.0, 0.8, 0.5, 0.9, 0.7, 0.0)
    world.params.transmission.mask_receive = (0.0, 0.0, 0.0, 0.0, 0.0, 0.85)
    world.params.transmission.infection_coefficient = 2.0

    sheds = (0.7, 0.9, 0.6, 0.8)
    t_eval = 4.05  # curve peak; midpoint of the step starting at 4.05 - DT/2
    sigmoid_peak = 1.0 / (1.0 + np.exp(-(-7.0 + 8.1)))
    for i, shed in enumerate(sheds):
        curve = plateau_curve(t_transmission=t_eval - 4.05, shed_factor=shed / sigmoid_peak)
        force_infection(world, i, t_now=t_eval, curve=curve)
        world.move_agent(i, work)
        world.pop.mask_worn[i] = np.int8(i + 1)
    world.move_agent(4, work)
    world.pop.mask_worn[4] = np.int8(5)
    return world, work, t_eval


class TestWorkedExample:
    def test_local_shed_is_0178(self):
        world, work, t = worked_example_world()
        shed = local_shed_by_group(world, work, AgeGroup.AGE_35_59, t - DT / 2, DT)
        assert shed == pytest.approx(0.178, abs=1e-3)

    def test_exposure_rate_is_012816(self):
        e = exposure_rate(np.array([0.178]), np.array([0.8]), psi=1.0, contact_reduction=0.9)
        assert e == pytest.approx(0.12816, abs=1e-6)

    def test_infection_rate_is_00384(self):
        tau = infection_rate(0.12816, receiver_mask_protection=0.85, coefficient=2.0)
        assert tau == pytest.approx(0.0384, abs=1e-3)

    def test_interact_infects_with_exponential_probability(self):
        # with the contact matrix pinned so e_j = 0.12816, agent 4's infection
        # probability over a one-day step is 1 - exp(-0.0384)
        hits = 0
        n = 4000
        for trial in range(n):
            world, work, t = worked_example_world(key=1000 + trial)
            world.params.contacts.matrices[LocationType.WORK] = np.full((6, 6), 0.8)
            ctx = StepContext(day=0, psi=1.0, contact_reduction=0.9)
            newly = interact(world, work, t - DT / 2, 1.0, ctx)
            assert newly in ([], [4])
            hits += bool(newly)
        expected = 1.0 - np.exp(-infection_rate(0.12816, 0.85, 2.0) * 1.0)
        sigma = np.sqrt(expected * (1 - expected) / n)
        assert abs(hits / n - expected) < 4 * sigma


class TestLocalShed:
    def test_empty_location_and_no_infectious(self):
        world = make_world(n_homes=2, n_agents=2)
        assert local_shed_by_group(world, 0, AgeGroup.AGE_35_59, 0.0, DT) == 0.0
        empty = world.add_location(LocationType.WORK)
        assert local_shed_by_group(world, empty, AgeGroup.AGE_35_59, 0.0, DT) == 0.0

    def test_singleton_average_is_midpoint_shed(self):
        world = make_world(n_homes=1, n_agents=1)
        curve = plateau_curve()
        inf = force_infection(world, 0, t_now=4.0, curve=curve)
        world.pop.mask_worn[0] = np.int8(MaskType.NONE)
        t = 4.0
        got = local_shed_by_group(world, 0, AgeGroup.AGE_35_59, t, DT)
        from tripsim.infection import viral_shed

        assert got == pytest.approx(float(viral_shed(curve, t + DT / 2)))

    def test_denominator_counts_noninfectious_members(self):
        world, work, t = worked_example_world()
        # removing the susceptible receiver changes the denominator 5 -> 4
        world.move_agent(4, int(world.pop.assigned[4, LocationType.HOME]))
        shed = local_shed_by_group(world, work, AgeGroup.AGE_35_59, t - DT / 2, DT)
        assert shed == pytest.approx(0.89 / 4.0, abs=1e-3)

    def test_quarantined_home_shed_reduced_exactly(self):
        world = make_world(n_homes=1, n_agents=2)
        force_infection(world, 0, t_now=4.0)
        world.pop.mask_worn[0] = np.int8(MaskType.NONE)
        base = group_shed_vector(world, 0, 4.0, DT)
        world.pop.quarantine_start[0] = 4.0
        reduced = group_shed_vector(world, 0, 4.0, DT)
        q_e = world.params.quarantine.efficiency
        assert reduced[AgeGroup.AGE_35_59] == pytest.approx(
            base[AgeGroup.AGE_35_59] * (1.0 - q_e))


class TestExposureAndRate:
    def test_vanishing_contact_reduction(self):
        e = exposure_rate(np.array([1.0]), np.array([1.0]), psi=1.0, contact_reduction=1e-12)
        assert e == pytest.approx(0.0, abs=1e-11)

    def test_two_groups_sum(self):
        e = exposure_rate(np.array([0.3, 0.4]), np.array([1.0, 1.0]), 1.0, 1.0)
        assert e == pytest.approx(0.7)

    def test_homogeneity(self):
        shed = np.array([0.1, 0.2, 0.0, 0.3, 0.05, 0.0])
        row = np.array([0.5, 1.5, 2.0, 0.7, 0.1, 0.9])
        assert exposure_rate(2 * shed, row, 0.9, 0.8) == pytest.approx(
            2 * exposure_rate(shed, row, 0.9, 0.8))

    def test_perfect_mask(self):
        assert infection_rate(0.5, 1.0, 2.0) == 0.0

    def test_fitted_coefficient(self):
        assert infection_rate(0.1, 0.0, 1.596) == pytest.approx(0.1596)


class TestSampleTransmission:
    def test_zero_rate_false_no_draw(self):
        stream = rng.Stream(1, 0)
        assert sample_transmission(stream, 0.0, DT) is False
        assert stream.counter == 0

    def test_huge_rate_true(self):
        assert sample_transmission(rng.Stream(1, 0), 1e12, DT) is True

    def test_small_rate_frequency(self):
        tau, dt = 0.0384, DT
        n = 10**6
        x = rng.batch_exponential(7, np.arange(n), np.zeros(n, np.uint32), np.full(n, tau))
        freq = float((x <= dt).mean())
        expected = 1.0 - np.exp(-tau * dt)
        assert abs(freq - expected) < 1e-4

    def test_monotone_in_rate_with_fixed_draws(self):
        n = 20_000
        ids = np.arange(n)
        x_low = rng.batch_exponential(3, ids, np.zeros(n, np.uint32), np.full(n, 0.5))
        x_high = rng.batch_exponential(3, ids, np.zeros(n, np.uint32), np.full(n, 1.5))
        hit_low = x_low <= DT
        hit_high = x_high <= DT
        assert (hit_low <= hit_high).all()


class TestInteract:
    def test_all_susceptible_no_infections(self):
        world = make_world(n_homes=1, n_agents=5)
        ctx = StepContext()
        assert interact(world, 0, 0.0, DT, ctx) == []
        assert world.pop.rng_counter.sum() == 0

    def test_cemetery_never_infects(self):
        world = make_world(n_homes=1, n_agents=3)
        cemetery = int(world.pop.assigned[0, LocationType.CEMETERY])
        world.pop.state[0] = np.int8(InfectionState.DEAD)
        world.move_agent(0, cemetery)
        ctx = StepContext()
        assert interact(world, cemetery, 0.0, DT, ctx) == []

    def test_order_independence_engine_vs_per_location(self):
        """The engine's batched pass equals per-location interact calls."""
        from tripsim import engine

        def fresh():
            world = make_world(n_homes=4, n_agents=12, kinds=(LocationType.WORK,), key=99)
            work = world.extra_venues[LocationType.WORK]
            for aid in (0, 5):
                force_infection(world, aid, t_now=4.0)
            for aid in (1, 2, 5, 7, 8):
                world.move_agent(aid, work)
            world.clock_hours = 96
            return world

        ctx = StepContext()
        w_engine = fresh()
        newly_engine = engine._interaction_phase(w_engine, 4.0, DT, ctx, workers=1)
        w_loc = fresh()
        newly_loc = []
        for lid in range(len(w_loc.locs)):
            newly_loc.extend(interact(w_loc, lid, 4.0, DT, ctx))
        assert sorted(newly_engine) == sorted(newly_loc)
        assert np.array_equal(w_engine.pop.rng_counter, w_loc.pop.rng_counter)
        assert np.array_equal(w_engine.pop.state, w_loc.pop.state)


def test_split_other_ratio_and_mean():
    other = np.arange(36, dtype=float).reshape(6, 6) + 1.0
    event, shop = split_other(other, event_ratio=1.5)
    assert np.allclose(event, 1.5 * shop)
    assert np.allclose((event + shop) / 2.0, other)
