"""Agent/location bookkeeping and world invariants."""

import numpy as np
import pytest

from tripsim.core import AgeGroup, LocationType, NO_ID, World
from tripsim.infection import InfectionState
from tests.conftest import force_infection, make_world


class TestAddAgent:
    def test_first_insertion(self, tiny_world):
        world = make_world(n_homes=1, n_agents=0)
        aid = world.add_agent(AgeGroup.AGE_15_34, {LocationType.HOME: 0})
        assert aid == 0
        assert world.pop.location[0] == 0
        assert world.locs.present[0] == [0]
        assert world.agent(0).state is InfectionState.SUSCEPTIBLE

    def test_rng_indices_distinct(self):
        world = make_world(n_homes=1, n_agents=3)
        assert set(range(3)) == {0, 1, 2}
        assert world.pop.rng_counter.tolist() == [0, 0, 0]

    def test_dense_ids_at_city_scale(self):
        world = World()
        world.locs.add_bulk(np.array([int(LocationType.HOME)], dtype=np.int8))
        n = 373_378
        assigned = np.zeros((n, 8), dtype=np.int32)
        ids = world.add_agents_bulk(np.zeros(n, dtype=np.int8), assigned)
        assert ids[0] == 0 and ids[-1] == n - 1
        assert len(world.pop) == n
        assert np.array_equal(np.unique(ids), np.arange(n))

    def test_missing_home_rejected(self):
        world = make_world(n_homes=1, n_agents=0)
        with pytest.raises(ValueError, match="Home"):
            world.add_agent(AgeGroup.AGE_0_4, {LocationType.WORK: 0})

    def test_dangling_venue_rejected(self):
        world = make_world(n_homes=1, n_agents=0)
        with pytest.raises(ValueError, match="dangling"):
            world.add_agent(AgeGroup.AGE_0_4, {LocationType.HOME: 99})


class TestMoveAgent:
    def test_list_transfer(self):
        world = make_world(n_homes=1, n_agents=1, kinds=(LocationType.WORK,))
        work = world.extra_venues[LocationType.WORK]
        world.move_agent(0, work)
        assert world.locs.present[work] == [0]
        assert 0 not in world.locs.present[0]
        assert world.pop.hours_at_location[0] == 0
        world.check_consistency()

    def test_self_move_is_noop(self):
        world = make_world(n_homes=1, n_agents=1)
        world.pop.hours_at_location[0] = 5
        world.move_agent(0, 0)
        assert world.pop.hours_at_location[0] == 5

    def test_dead_agent_stays_in_cemetery(self):
        world = make_world(n_homes=1, n_agents=1)
        world.pop.state[0] = np.int8(InfectionState.DEAD)
        cemetery = int(world.pop.assigned[0, LocationType.CEMETERY])
        world.move_agent(0, cemetery)
        assert world.pop.location[0] == cemetery
        world.check_consistency()

    def test_alive_agent_rejected_from_cemetery(self):
        world = make_world(n_homes=1, n_agents=1)
        cemetery = int(world.pop.assigned[0, LocationType.CEMETERY])
        with pytest.raises(ValueError, match="dead"):
            world.move_agent(0, cemetery)

    def test_unknown_target_rejected(self):
        world = make_world(n_homes=1, n_agents=1)
        with pytest.raises(ValueError, match="unknown"):
            world.move_agent(0, 999)

    def test_occupancy_and_infectious_counters(self):
        world = make_world(n_homes=2, n_agents=2, kinds=(LocationType.WORK,))
        force_infection(world, 0, t_now=1.0)  # infectious after tiny exposed stage
        assert world.locs.n_infectious[world.pop.location[0]] == 1
        work = world.extra_venues[LocationType.WORK]
        world.move_agent(0, work)
        assert world.locs.n_infectious[work] == 1
        assert world.locs.n_infectious[0] == 0
        world.check_consistency()


class TestInvariants:
    def test_present_lists_partition_population(self):
        world = make_world(n_homes=3, n_agents=10, kinds=(LocationType.WORK,))
        work = world.extra_venues[LocationType.WORK]
        for aid in (1, 4, 7):
            world.move_agent(aid, work)
        total = sum(len(p) for p in world.locs.present)
        assert total == 10
        world.check_consistency()

    def test_state_counts_conserve_population(self):
        world = make_world(n_homes=2, n_agents=6)
        force_infection(world, 2, t_now=0.5)
        counts = world.state_counts()
        assert counts.sum() == 6

    def test_capacity_checked(self):
        world = make_world(n_homes=1, n_agents=3, kinds=(LocationType.BASIC_SHOP,))
        shop = world.extra_venues[LocationType.BASIC_SHOP]
        world.locs.capacity[shop] = 1
        world.move_agent(0, shop)
        world.check_consistency()
        world.move_agent(1, shop)  # move itself does not gate; invariant catches it
        with pytest.raises(AssertionError):
            world.check_consistency()
