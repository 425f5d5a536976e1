"""Shared world-building helpers for the test suite."""

import numpy as np
import pytest

from tripsim.core import AgeGroup, LocationType, World
from tripsim.infection import Infection, InfectionCourse, InfectionState, ViralCurve
from tripsim.interventions import Schedule, TestingStrategy
from tripsim.mobility import ExtendedRules, TripPlan
from tripsim.scenario_io import default_parameters


def make_world(n_homes=1, n_agents=1, kinds=(), key=7, age=AgeGroup.AGE_35_59,
               testing=None, rules=None):
    """Small world: homes plus medical singletons plus extra venues.

    Agents are distributed round-robin over homes; every extra venue kind in
    ``kinds`` is assigned to every agent.
    """
    world = World(rng_key=key)
    world.params = default_parameters()
    homes = [world.add_location(LocationType.HOME) for _ in range(n_homes)]
    hospital = world.add_location(LocationType.HOSPITAL)
    icu = world.add_location(LocationType.ICU)
    cemetery = world.add_location(LocationType.CEMETERY)
    extra = {}
    for kind in kinds:
        extra.setdefault(kind, world.add_location(kind))
    for i in range(n_agents):
        assigned = {LocationType.HOME: homes[i % n_homes],
                    LocationType.HOSPITAL: hospital,
                    LocationType.ICU: icu,
                    LocationType.CEMETERY: cemetery}
        assigned.update(extra)
        world.add_agent(age if np.isscalar(age) or isinstance(age, AgeGroup) else age[i], assigned)
    world.trips = TripPlan([], n_agents)
    world.testing = testing if testing is not None else TestingStrategy()
    world.schedule = Schedule()
    world.extended_rules = rules
    world.extra_venues = extra
    return world


def plateau_curve(t_transmission=0.0, shed_factor=1.0, alpha=-7.0, beta=1.0):
    """Standard viral curve with the fitted slope/peak constants."""
    return ViralCurve(t_transmission=t_transmission, incline=2.0, peak=8.1,
                      decline=-0.17, shed_factor=shed_factor, alpha=alpha, beta=beta)


def force_infection(world, agent_id, t_now, curve=None, course=None):
    """Attach a hand-built infection and fast-forward its state to t_now."""
    if curve is None:
        curve = plateau_curve()
    if course is None:
        course = InfectionCourse(
            states=(InfectionState.EXPOSED, InfectionState.NO_SYMPTOMS, InfectionState.RECOVERED),
            times=(curve.t_transmission, curve.t_transmission + 1e-6, curve.t_clear + 5.0),
        )
    world.register_infection(agent_id, Infection(variant="wild", curve=curve, course=course))
    world.sync_infection_state(agent_id, t_now)
    return world.pop.infection[agent_id]


@pytest.fixture
def tiny_world():
    return make_world(n_homes=2, n_agents=4)
