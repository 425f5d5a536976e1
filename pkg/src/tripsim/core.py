"""Domain types: agents, locations, age groups, and the world container.

The population and venue tables are stored as parallel numpy arrays
(structure-of-arrays) so that the engine's hot phases are vectorizable;
``Agent`` and ``Location`` are lightweight views over those arrays for
single-entity access. Ids are dense integers and present-lists store ids,
which keeps a move a constant-time list splice (swap-remove using a stored
per-agent list position).

Time is kept as an integer count of hours since the scenario start
(24 steps per day at the default one-hour step); continuous quantities such
as infection event times are floats in days.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

from .infection import Infection, InfectionState

HOURS_PER_DAY = 24


class AgeGroup(IntEnum):
    """Six age bands: 0-4, 5-14, 15-34, 35-59, 60-79, 80+ years."""

    AGE_0_4 = 0
    AGE_5_14 = 1
    AGE_15_34 = 2
    AGE_35_59 = 3
    AGE_60_79 = 4
    AGE_80_PLUS = 5


N_AGE_GROUPS = 6
AGE_BANDS = ((0, 4), (5, 14), (15, 34), (35, 59), (60, 79), (80, 120))


class LocationType(IntEnum):
    HOME = 0
    SCHOOL = 1
    WORK = 2
    SOCIAL_EVENT = 3
    BASIC_SHOP = 4
    HOSPITAL = 5
    ICU = 6
    CEMETERY = 7


N_LOCATION_TYPES = 8


class MaskType(IntEnum):
    """Owned/required mask kinds; protection values live in the parameters."""

    NONE = 0
    GENERIC = 1
    SURGICAL = 2
    FFP2 = 3


N_MASK_TYPES = 4

#: sentinel for "no venue assigned" / "no capacity"
NO_ID = -1


@dataclass
class NpiRecord:
    """Active restrictions at a venue."""

    mask_required: Optional[MaskType] = None
    entry_factor: float = 1.0
    contact_scale: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.entry_factor <= 1.0:
            raise ValueError("entry_factor must be in [0, 1]")
        if self.contact_scale < 0:
            raise ValueError("contact_scale must be >= 0")


class LocationTable:
    """Venue table: typed, capacity-bounded, restriction-aware."""

    def __init__(self):
        self.kind = np.empty(0, dtype=np.int8)
        self.capacity = np.empty(0, dtype=np.int32)
        self.entry_factor = np.empty(0, dtype=np.float64)
        self.contact_scale = np.empty(0, dtype=np.float64)
        self.mask_required = np.empty(0, dtype=np.int8)  # -1 = no mandate
        self.present: list[list[int]] = []
        # occupancy by age group and count of state-infectious agents present
        self.occupancy = np.empty((0, N_AGE_GROUPS), dtype=np.int32)
        self.n_infectious = np.empty(0, dtype=np.int32)

    def __len__(self) -> int:
        return len(self.present)

    def add(self, kind: LocationType, capacity: Optional[int] = None) -> int:
        lid = len(self.present)
        self.kind = np.append(self.kind, np.int8(kind))
        self.capacity = np.append(self.capacity, np.int32(NO_ID if capacity is None else capacity))
        self.entry_factor = np.append(self.entry_factor, 1.0)
        self.contact_scale = np.append(self.contact_scale, 1.0)
        self.mask_required = np.append(self.mask_required, np.int8(-1))
        self.present.append([])
        self.occupancy = np.vstack([self.occupancy, np.zeros((1, N_AGE_GROUPS), dtype=np.int32)])
        self.n_infectious = np.append(self.n_infectious, np.int32(0))
        return lid

    def add_bulk(self, kinds: np.ndarray, capacities: Optional[np.ndarray] = None) -> np.ndarray:
        """Append many venues in one concatenation; returns the new ids."""
        n = len(kinds)
        start = len(self.present)
        if capacities is None:
            capacities = np.full(n, NO_ID, dtype=np.int32)
        self.kind = np.concatenate([self.kind, np.asarray(kinds, np.int8)])
        self.capacity = np.concatenate([self.capacity, np.asarray(capacities, np.int32)])
        self.entry_factor = np.concatenate([self.entry_factor, np.ones(n)])
        self.contact_scale = np.concatenate([self.contact_scale, np.ones(n)])
        self.mask_required = np.concatenate([self.mask_required, np.full(n, np.int8(-1))])
        self.present.extend([] for _ in range(n))
        self.occupancy = np.vstack([self.occupancy, np.zeros((n, N_AGE_GROUPS), dtype=np.int32)])
        self.n_infectious = np.concatenate([self.n_infectious, np.zeros(n, np.int32)])
        return np.arange(start, start + n, dtype=np.int64)


class Population:
    """Agent table as parallel arrays plus ragged per-agent course storage."""

    def __init__(self):
        self.age = np.empty(0, dtype=np.int8)
        self.location = np.empty(0, dtype=np.int32)
        self.hours_at_location = np.empty(0, dtype=np.int32)
        self.assigned = np.empty((0, N_LOCATION_TYPES), dtype=np.int32)
        self.rng_counter = np.empty(0, dtype=np.uint32)
        self.state = np.empty(0, dtype=np.int8)
        self.quarantine_start = np.empty(0, dtype=np.float64)  # days; NaN = none
        self.last_negative_time = np.empty(0, dtype=np.float64)  # days; NaN = none
        self.last_negative_validity = np.empty(0, dtype=np.float64)  # days
        self.mask_owned = np.empty(0, dtype=np.int8)
        self.mask_worn = np.empty(0, dtype=np.int8)  # worn mask type; 0 = bare
        self.compliance = np.empty((0, N_LOCATION_TYPES), dtype=np.float64)
        self.vaccinated = np.empty(0, dtype=bool)
        # current infection (curve parameters mirrored for vector math)
        self.inf_t_transmission = np.empty(0, dtype=np.float64)
        self.inf_incline = np.empty(0, dtype=np.float64)
        self.inf_peak = np.empty(0, dtype=np.float64)
        self.inf_decline = np.empty(0, dtype=np.float64)
        self.inf_shed_factor = np.empty(0, dtype=np.float64)
        self.course_pos = np.empty(0, dtype=np.int16)
        self.next_transition = np.empty(0, dtype=np.float64)  # days; inf = none
        self.detected = np.empty(0, dtype=bool)  # current infection already detected
        self.infection: list[Optional[Infection]] = []
        self.history: list[list] = []  # (kind, time, payload) tuples
        # per-location-list position for O(1) swap-remove
        self.present_pos = np.empty(0, dtype=np.int32)

    def __len__(self) -> int:
        return len(self.infection)

    def add(self, age: AgeGroup, assigned_row: np.ndarray, home: int,
            compliance_row: Optional[np.ndarray] = None,
            mask_owned: MaskType = MaskType.GENERIC) -> int:
        aid = len(self.infection)
        self.age = np.append(self.age, np.int8(age))
        self.location = np.append(self.location, np.int32(home))
        self.hours_at_location = np.append(self.hours_at_location, np.int32(0))
        self.assigned = np.vstack([self.assigned, assigned_row[None, :]])
        self.rng_counter = np.append(self.rng_counter, np.uint32(0))
        self.state = np.append(self.state, np.int8(InfectionState.SUSCEPTIBLE))
        self.quarantine_start = np.append(self.quarantine_start, np.nan)
        self.last_negative_time = np.append(self.last_negative_time, np.nan)
        self.last_negative_validity = np.append(self.last_negative_validity, 0.0)
        self.mask_owned = np.append(self.mask_owned, np.int8(mask_owned))
        self.mask_worn = np.append(self.mask_worn, np.int8(MaskType.NONE))
        if compliance_row is None:
            compliance_row = np.zeros(N_LOCATION_TYPES)
        self.compliance = np.vstack([self.compliance, compliance_row[None, :]])
        self.vaccinated = np.append(self.vaccinated, False)
        self.inf_t_transmission = np.append(self.inf_t_transmission, np.nan)
        self.inf_incline = np.append(self.inf_incline, np.nan)
        self.inf_peak = np.append(self.inf_peak, np.nan)
        self.inf_decline = np.append(self.inf_decline, np.nan)
        self.inf_shed_factor = np.append(self.inf_shed_factor, np.nan)
        self.course_pos = np.append(self.course_pos, np.int16(0))
        self.next_transition = np.append(self.next_transition, np.inf)
        self.detected = np.append(self.detected, False)
        self.infection.append(None)
        self.history.append([])
        self.present_pos = np.append(self.present_pos, np.int32(NO_ID))
        return aid


@dataclass
class StepContext:
    """Schedule-dependent values resolved once per step (day granularity).

    ``extra_trips`` carries special-event trips injected for this day as an
    (agent_ids, targets, activities, start_minutes) tuple of arrays.
    """

    day: int = 0
    psi: float = 1.0
    contact_reduction: float = 1.0
    testing_multiplier: float = 1.0
    extra_trips: Optional[tuple] = None


@dataclass
class Agent:
    """Single-agent view over the population arrays."""

    world: "World"
    id: int

    @property
    def age(self) -> AgeGroup:
        return AgeGroup(int(self.world.pop.age[self.id]))

    @property
    def current_location(self) -> int:
        return int(self.world.pop.location[self.id])

    @property
    def state(self) -> InfectionState:
        return InfectionState(int(self.world.pop.state[self.id]))

    @property
    def infection(self) -> Optional[Infection]:
        return self.world.pop.infection[self.id]

    @property
    def quarantined(self) -> bool:
        return not np.isnan(self.world.pop.quarantine_start[self.id])

    def assigned_venue(self, kind: LocationType) -> int:
        return int(self.world.pop.assigned[self.id, kind])


@dataclass
class Location:
    """Single-venue view over the location table."""

    world: "World"
    id: int

    @property
    def kind(self) -> LocationType:
        return LocationType(int(self.world.locs.kind[self.id]))

    @property
    def capacity(self) -> Optional[int]:
        cap = int(self.world.locs.capacity[self.id])
        return None if cap == NO_ID else cap

    @property
    def present(self) -> list[int]:
        return self.world.locs.present[self.id]

    @property
    def npi(self) -> NpiRecord:
        req = int(self.world.locs.mask_required[self.id])
        return NpiRecord(
            mask_required=None if req < 0 else MaskType(req),
            entry_factor=float(self.world.locs.entry_factor[self.id]),
            contact_scale=float(self.world.locs.contact_scale[self.id]),
        )


class World:
    """Complete simulation state.

    Agents, venues, trip plan, parameters, testing strategy, intervention
    schedule, clock (hours since start) and the 64-bit RNG key. The trip
    plan, parameters, testing strategy and schedule are attached by the
    scenario loader; a bare ``World`` is still simulatable (everyone stays
    home).
    """

    def __init__(self, rng_key: int = 0):
        self.pop = Population()
        self.locs = LocationTable()
        self.rng_key = int(rng_key) & 0xFFFFFFFFFFFFFFFF
        self.clock_hours = 0
        self.t0_date = None  # datetime.date anchoring day 0, optional
        self.t0_weekday = 0  # 0 = Monday; weekday of day 0
        self.trips = None  # mobility.TripPlan
        self.params = None  # scenario_io.ParameterSet
        self.testing = None  # interventions.TestingStrategy
        self.schedule = None  # interventions.Schedule
        self.extended_rules = None  # mobility.ExtendedRules
        self.detected_cum = np.zeros(N_AGE_GROUPS, dtype=np.int64)

    # -- time ---------------------------------------------------------------

    @property
    def t_days(self) -> float:
        return self.clock_hours / HOURS_PER_DAY

    @property
    def day(self) -> int:
        return self.clock_hours // HOURS_PER_DAY

    @property
    def weekday(self) -> int:
        return (self.t0_weekday + self.day) % 7

    @property
    def minute_of_week(self) -> int:
        return (self.t0_weekday * 1440 + self.clock_hours * 60) % (7 * 1440)

    # -- construction -------------------------------------------------------

    def add_location(self, kind: LocationType, capacity: Optional[int] = None) -> int:
        return self.locs.add(kind, capacity)

    def add_agent(self, age: AgeGroup, assigned: dict, compliance=None,
                  mask_owned: MaskType = MaskType.GENERIC) -> int:
        """Create a Susceptible agent at its Home.

        ``assigned`` maps LocationType to a venue id and must contain a Home;
        the new agent's RNG subsequence index is its id, counter 0.
        """
        if LocationType.HOME not in assigned:
            raise ValueError("agent needs a Home assignment")
        row = np.full(N_LOCATION_TYPES, NO_ID, dtype=np.int32)
        for kind, lid in assigned.items():
            if not 0 <= lid < len(self.locs):
                raise ValueError(f"dangling venue id {lid} for {LocationType(kind).name}")
            row[LocationType(kind)] = lid
        home = int(row[LocationType.HOME])
        if self.locs.kind[home] != LocationType.HOME:
            raise ValueError(f"venue {home} is not a Home")
        comp = None if compliance is None else np.asarray(compliance, dtype=np.float64)
        aid = self.pop.add(age, row, home, comp, mask_owned)
        plist = self.locs.present[home]
        self.pop.present_pos[aid] = len(plist)
        plist.append(aid)
        self.locs.occupancy[home, age] += 1
        return aid

    def add_agents_bulk(self, ages: np.ndarray, assigned: np.ndarray,
                        compliance: Optional[np.ndarray] = None,
                        mask_owned: Optional[np.ndarray] = None) -> np.ndarray:
        """Append many agents in one array concatenation (large scenarios).

        ``assigned`` is (n, N_LOCATION_TYPES) of venue ids (NO_ID where
        unassigned) and must contain a valid Home column. Returns new ids.
        """
        n = len(ages)
        if n == 0:
            return np.empty(0, dtype=np.int64)
        ages = np.asarray(ages, dtype=np.int8)
        assigned = np.asarray(assigned, dtype=np.int32)
        homes = assigned[:, LocationType.HOME]
        if (homes < 0).any() or (homes >= len(self.locs)).any():
            raise ValueError("every agent needs a valid Home assignment")
        if (self.locs.kind[homes] != LocationType.HOME).any():
            raise ValueError("Home column references non-Home venues")
        referenced = assigned[assigned != NO_ID]
        if referenced.size and (referenced.min() < 0 or referenced.max() >= len(self.locs)):
            raise ValueError("dangling venue id in assignment table")
        if compliance is None:
            compliance = np.zeros((n, N_LOCATION_TYPES))
        if mask_owned is None:
            mask_owned = np.full(n, np.int8(MaskType.GENERIC))

        pop = self.pop
        start = len(pop)
        ids = np.arange(start, start + n, dtype=np.int64)
        pop.age = np.concatenate([pop.age, ages])
        pop.location = np.concatenate([pop.location, homes.astype(np.int32)])
        pop.hours_at_location = np.concatenate([pop.hours_at_location, np.zeros(n, np.int32)])
        pop.assigned = np.vstack([pop.assigned, assigned])
        pop.rng_counter = np.concatenate([pop.rng_counter, np.zeros(n, np.uint32)])
        pop.state = np.concatenate([pop.state, np.full(n, np.int8(InfectionState.SUSCEPTIBLE))])
        pop.quarantine_start = np.concatenate([pop.quarantine_start, np.full(n, np.nan)])
        pop.last_negative_time = np.concatenate([pop.last_negative_time, np.full(n, np.nan)])
        pop.last_negative_validity = np.concatenate([pop.last_negative_validity, np.zeros(n)])
        pop.mask_owned = np.concatenate([pop.mask_owned, np.asarray(mask_owned, np.int8)])
        pop.mask_worn = np.concatenate([pop.mask_worn, np.zeros(n, np.int8)])
        pop.compliance = np.vstack([pop.compliance, np.asarray(compliance, np.float64)])
        pop.vaccinated = np.concatenate([pop.vaccinated, np.zeros(n, bool)])
        for name in ("inf_t_transmission", "inf_incline", "inf_peak", "inf_decline", "inf_shed_factor"):
            setattr(pop, name, np.concatenate([getattr(pop, name), np.full(n, np.nan)]))
        pop.course_pos = np.concatenate([pop.course_pos, np.zeros(n, np.int16)])
        pop.next_transition = np.concatenate([pop.next_transition, np.full(n, np.inf)])
        pop.detected = np.concatenate([pop.detected, np.zeros(n, bool)])
        pop.infection.extend([None] * n)
        pop.history.extend([] for _ in range(n))
        pos = np.empty(n, dtype=np.int32)
        for i, (aid, home) in enumerate(zip(ids, homes)):
            plist = self.locs.present[home]
            pos[i] = len(plist)
            plist.append(int(aid))
        pop.present_pos = np.concatenate([pop.present_pos, pos])
        np.add.at(self.locs.occupancy, (homes, ages), 1)
        return ids

    # -- movement -----------------------------------------------------------

    def move_agent(self, agent_id: int, target: int) -> None:
        """Relocate an agent; both present-lists stay consistent.

        Moving an agent to its current location is a no-op (the stay clock
        is not reset). Only dead agents may enter the Cemetery.
        """
        pop, locs = self.pop, self.locs
        old = int(pop.location[agent_id])
        if target == old:
            return
        if not 0 <= target < len(locs.present):
            raise ValueError(f"unknown location {target}")
        state = int(pop.state[agent_id])
        if locs.kind[target] == _CEMETERY_CODE and state != _DEAD_CODE:
            raise ValueError("only dead agents enter the Cemetery")

        group = int(pop.age[agent_id])
        infectious = state in _INFECTIOUS_CODES

        plist = locs.present[old]
        pos = int(pop.present_pos[agent_id])
        last = plist[-1]
        plist[pos] = last
        pop.present_pos[last] = pos
        plist.pop()
        locs.occupancy[old, group] -= 1
        if infectious:
            locs.n_infectious[old] -= 1

        tlist = locs.present[target]
        pop.present_pos[agent_id] = len(tlist)
        tlist.append(agent_id)
        locs.occupancy[target, group] += 1
        if infectious:
            locs.n_infectious[target] += 1

        pop.location[agent_id] = target
        pop.hours_at_location[agent_id] = 0

    # -- infection bookkeeping ------------------------------------------------

    def register_infection(self, agent_id: int, infection: Infection) -> None:
        """Attach a freshly drawn infection: state Exposed, curve mirrored.

        The mirrored curve parameters keep the engine's shed computation
        vectorizable; the infection object itself is retained for course
        lookups, analysis and serialization.
        """
        pop = self.pop
        if pop.infection[agent_id] is not None and pop.state[agent_id] != InfectionState.SUSCEPTIBLE:
            raise ValueError(f"agent {agent_id} already infected")
        curve = infection.curve
        pop.infection[agent_id] = infection
        pop.inf_t_transmission[agent_id] = curve.t_transmission
        pop.inf_incline[agent_id] = curve.incline
        pop.inf_peak[agent_id] = curve.peak
        pop.inf_decline[agent_id] = curve.decline
        pop.inf_shed_factor[agent_id] = curve.shed_factor
        pop.state[agent_id] = np.int8(InfectionState.EXPOSED)
        pop.course_pos[agent_id] = 0
        pop.next_transition[agent_id] = infection.course.times[1]
        pop.detected[agent_id] = False
        pop.history[agent_id].append(("infection", curve.t_transmission, infection))

    def record_vaccination(self, agent_id: int, t: float, vaccine: str = "generic") -> None:
        self.pop.vaccinated[agent_id] = True
        self.pop.history[agent_id].append(("vaccination", float(t), vaccine))

    def sync_infection_state(self, agent_id: int, t: float) -> None:
        """Fast-forward the cached course position/state to time ``t``.

        Used when an infection is attached mid-course (backdated seeding);
        keeps the per-location infectious counters consistent.
        """
        pop = self.pop
        infection = pop.infection[agent_id]
        course = infection.course
        times = course.times
        pos = int(np.searchsorted(times, t, side="right")) - 1
        pos = max(pos, 0)
        old_state = InfectionState(int(pop.state[agent_id]))
        new_state = course.states[pos]
        pop.course_pos[agent_id] = np.int16(pos)
        pop.next_transition[agent_id] = times[pos + 1] if pos + 1 < len(times) else np.inf
        pop.state[agent_id] = np.int8(new_state)
        loc = int(pop.location[agent_id])
        was = old_state in _INFECTIOUS_STATES_SET
        now = new_state in _INFECTIOUS_STATES_SET
        if now and not was:
            self.locs.n_infectious[loc] += 1
        elif was and not now:
            self.locs.n_infectious[loc] -= 1

    # -- views / checks -----------------------------------------------------

    def agent(self, agent_id: int) -> Agent:
        return Agent(self, agent_id)

    def location(self, location_id: int) -> Location:
        return Location(self, location_id)

    @property
    def n_agents(self) -> int:
        return len(self.pop)

    def state_counts(self) -> np.ndarray:
        """Count of agents per infection state (length 8)."""
        return np.bincount(self.pop.state, minlength=len(InfectionState))

    def check_consistency(self) -> None:
        """Raise AssertionError if core invariants are violated."""
        n = self.n_agents
        total = sum(len(p) for p in self.locs.present)
        assert total == n, f"present lists hold {total} agents, expected {n}"
        seen = np.zeros(n, dtype=bool)
        for lid, plist in enumerate(self.locs.present):
            for pos, aid in enumerate(plist):
                assert not seen[aid], f"agent {aid} present twice"
                seen[aid] = True
                assert self.pop.location[aid] == lid
                assert self.pop.present_pos[aid] == pos
        occ = np.zeros_like(self.locs.occupancy)
        for lid, plist in enumerate(self.locs.present):
            for aid in plist:
                occ[lid, self.pop.age[aid]] += 1
        assert (occ == self.locs.occupancy).all(), "occupancy counters out of sync"
        cap = self.locs.capacity
        sizes = np.array([len(p) for p in self.locs.present])
        capped = cap != NO_ID
        assert (sizes[capped] <= cap[capped]).all(), "capacity exceeded"
        assert int(self.state_counts().sum()) == n


_INFECTIOUS_STATES_SET = frozenset({InfectionState.NO_SYMPTOMS, InfectionState.MILD,
                                    InfectionState.SEVERE, InfectionState.CRITICAL})
_INFECTIOUS_CODES = {int(s) for s in _INFECTIOUS_STATES_SET}
_CEMETERY_CODE = int(LocationType.CEMETERY)
_DEAD_CODE = int(InfectionState.DEAD)


def add_agent(world: World, age: AgeGroup, assigned: dict) -> int:
    """Module-level convenience wrapper around ``World.add_agent``."""
    return world.add_agent(age, assigned)


def move_agent(world: World, agent_id: int, target: int) -> None:
    """Module-level convenience wrapper around ``World.move_agent``."""
    world.move_agent(agent_id, target)
