"""Infection-state mobility rules, fallback schedule rules, trip replay.

Movement has three layers, in strict precedence order:

1. core rules driven by infection state and test results (hospitalization,
   ICU, cemetery, quarantine at home, return home after recovery);
2. the weekly trip plan, replayed every week, for agents covered by it;
3. extended schedule rules (school/work/shopping/event templates by age
   group, weekday and hour) as a fallback for agents without trips.

A trip only executes if it survives the activity's reduction-factor draw
and the target's testing, mask, entry-reduction and capacity gates. Within
one step, trips are ordered per agent by scheduled time; movement outcomes
are specified in (trip round, agent id) order so that capacity contention
resolves deterministically and independently of thread scheduling.

Per-trip RNG draw order (from the agent's own stream): activity retention
(only when the factor is < 1), the entry gate's draws (see interventions),
mask decision, entry-reduction draw (only when the factor is < 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

from .core import LocationType, MaskType, NO_ID, StepContext, World
from .infection import InfectionState
from .interventions import GateOutcome, entry_gate, mask_decision, MaskOutcome
from .rng import Stream

MINUTES_PER_WEEK = 7 * 24 * 60


class Activity(IntEnum):
    """Trip purpose; the unit reduction factors apply per activity."""

    HOME = 0
    SCHOOL = 1
    WORK = 2
    EVENT = 3
    SHOP = 4
    OTHER = 5


_ACTIVITY_NAMES = {a.name.lower(): a for a in Activity}


def activity_from_name(name: str) -> Activity:
    try:
        return _ACTIVITY_NAMES[name.strip().lower()]
    except KeyError:
        raise ValueError(f"unknown activity {name!r}") from None


@dataclass(frozen=True)
class Trip:
    """One weekly-recurring trip of one agent."""

    agent_id: int
    weekday: int          # 0 = Monday .. 6 = Sunday
    start_minute: int     # minute of day, 0..1439
    target: int
    activity: Activity

    def __post_init__(self):
        if not 0 <= self.weekday <= 6:
            raise ValueError("weekday must be 0..6")
        if not 0 <= self.start_minute < 1440:
            raise ValueError("start_minute must be 0..1439")

    @property
    def time_of_week(self) -> int:
        return self.weekday * 1440 + self.start_minute


@dataclass(frozen=True)
class ReductionWindow:
    """Fraction of trips of an activity retained during a day window."""

    activity: Activity
    day_start: int
    day_end: int  # exclusive
    retain: float

    def __post_init__(self):
        if not 0.0 <= self.retain <= 1.0:
            raise ValueError("retain must be in [0, 1]")


class TripPlan:
    """Per-agent weekly trip chains plus activity reduction windows."""

    def __init__(self, trips: list[Trip], n_agents: int,
                 reductions: Optional[list[ReductionWindow]] = None):
        order = sorted(range(len(trips)), key=lambda i: (trips[i].time_of_week, i))
        self.agent = np.array([trips[i].agent_id for i in order], dtype=np.int64)
        self.weekday = np.array([trips[i].weekday for i in order], dtype=np.int8)
        self.start_minute = np.array([trips[i].start_minute for i in order], dtype=np.int16)
        self.target = np.array([trips[i].target for i in order], dtype=np.int32)
        self.activity = np.array([int(trips[i].activity) for i in order], dtype=np.int8)
        self.time_of_week = (self.weekday.astype(np.int32) * 1440 + self.start_minute)
        self.covered = np.zeros(n_agents, dtype=bool)
        if len(self.agent):
            self.covered[self.agent] = True
        self.reductions: list[ReductionWindow] = list(reductions or [])

    def __len__(self) -> int:
        return len(self.agent)

    def add_reduction(self, window: ReductionWindow) -> None:
        self.reductions.append(window)

    def retention(self, activity: int, day: int) -> float:
        """Retained-trip fraction; the most recently added active window wins.

        Trips home are never reduced.
        """
        if activity == Activity.HOME:
            return 1.0
        retain = 1.0
        for window in self.reductions:
            if int(window.activity) == activity and window.day_start <= day < window.day_end:
                retain = window.retain
        return retain

    def indices_in_window(self, minute_of_week: int, minutes: int) -> np.ndarray:
        """Trip indices scheduled within [minute_of_week, +minutes) mod week."""
        m0 = minute_of_week % MINUTES_PER_WEEK
        m1 = m0 + minutes
        lo = np.searchsorted(self.time_of_week, m0, side="left")
        if m1 <= MINUTES_PER_WEEK:
            hi = np.searchsorted(self.time_of_week, m1, side="left")
            return np.arange(lo, hi)
        hi = np.searchsorted(self.time_of_week, m1 - MINUTES_PER_WEEK, side="left")
        return np.concatenate([np.arange(lo, len(self.agent)), np.arange(0, hi)])


def empty_trip_plan(n_agents: int) -> TripPlan:
    return TripPlan([], n_agents)


@dataclass
class ExtendedRules:
    """Fallback mobility templates by age group, weekday and hour.

    Hours are trigger points: the rule proposes a destination only in the
    step that contains the trigger. Venues come from the agent's
    assignments; missing assignments disable the respective rule.
    """

    school_ages: tuple = (1,)
    work_ages: tuple = (2, 3)
    school_go_hour: int = 8
    school_return_hour: int = 15
    work_go_hour: int = 8
    work_return_hour: int = 17
    shop_weekday: int = 5
    shop_go_hour: int = 10
    shop_return_hour: int = 11
    event_weekday: int = 5
    event_go_hour: int = 19
    event_return_hour: int = 22

    def destination(self, age: int, weekday: int, hour: int) -> Optional[tuple[LocationType, Activity]]:
        """(venue slot, activity) triggered at this hour, or None."""
        weekday_is_school_day = weekday < 5
        if weekday_is_school_day and age in self.school_ages:
            if hour == self.school_go_hour:
                return LocationType.SCHOOL, Activity.SCHOOL
            if hour == self.school_return_hour:
                return LocationType.HOME, Activity.HOME
        if weekday_is_school_day and age in self.work_ages:
            if hour == self.work_go_hour:
                return LocationType.WORK, Activity.WORK
            if hour == self.work_return_hour:
                return LocationType.HOME, Activity.HOME
        if weekday == self.shop_weekday and age >= 2:
            if hour == self.shop_go_hour:
                return LocationType.BASIC_SHOP, Activity.SHOP
            if hour == self.shop_return_hour:
                return LocationType.HOME, Activity.HOME
        if weekday == self.event_weekday and age >= 2:
            if hour == self.event_go_hour:
                return LocationType.SOCIAL_EVENT, Activity.EVENT
            if hour == self.event_return_hour:
                return LocationType.HOME, Activity.HOME
        return None


def core_rule(world: World, agent_id: int, t: float) -> Optional[int]:
    """Infection-state forced destination; None when no rule fires.

    Takes precedence over all other mobility. Returns the target venue id,
    or None when the agent is already where the rule requires (or no rule
    applies).
    """
    pop = world.pop
    state = InfectionState(int(pop.state[agent_id]))
    loc = int(pop.location[agent_id])
    assigned = pop.assigned[agent_id]

    def want(slot: LocationType) -> Optional[int]:
        target = int(assigned[slot])
        if target == NO_ID:
            raise ValueError(f"agent {agent_id} lacks a {slot.name} assignment")
        return target if target != loc else None

    if state is InfectionState.DEAD:
        return want(LocationType.CEMETERY)
    if state is InfectionState.CRITICAL:
        return want(LocationType.ICU)
    if state is InfectionState.SEVERE:
        return want(LocationType.HOSPITAL)
    kind = LocationType(int(world.locs.kind[loc]))
    if state is InfectionState.RECOVERED and kind in (LocationType.HOSPITAL, LocationType.ICU):
        return want(LocationType.HOME)
    if not np.isnan(pop.quarantine_start[agent_id]) and kind not in (
            LocationType.HOME, LocationType.HOSPITAL, LocationType.ICU):
        return want(LocationType.HOME)
    return None


def extended_rule(world: World, agent_id: int, t: float) -> Optional[tuple[int, Activity]]:
    """Fallback destination from the extended rule set, or None.

    Only meaningful for agents not covered by the trip plan; evaluated at
    whole simulated hours.
    """
    rules = world.extended_rules
    if rules is None:
        return None
    hours = int(round(t * 24.0))
    weekday = (world.t0_weekday + hours // 24) % 7
    hour = hours % 24
    hit = rules.destination(int(world.pop.age[agent_id]), weekday, hour)
    if hit is None:
        return None
    slot, activity = hit
    target = int(world.pop.assigned[agent_id, slot])
    if target == NO_ID or target == int(world.pop.location[agent_id]):
        return None
    return target, activity


def _attempt_trip(world: World, agent_id: int, target: int, activity: int,
                  t: float, ctx: StepContext, stream: Stream) -> bool:
    """Run one trip through all gates; applies the move. True if it moved.

    Mirrors the engine's batched wave order exactly; see module docstring.
    """
    pop, locs = world.pop, world.locs
    if target == int(pop.location[agent_id]):
        return False
    entry_factor = float(locs.entry_factor[target])
    if entry_factor <= 0.0:
        return False
    retain = world.trips.retention(activity, ctx.day) if world.trips is not None else 1.0
    if retain <= 0.0:
        return False
    if retain < 1.0 and stream.uniform01() >= retain:
        return False
    gate = entry_gate(world, agent_id, target, t, world.testing, stream, ctx.testing_multiplier)
    if gate is GateOutcome.DENY_QUARANTINE:
        home = int(pop.assigned[agent_id, LocationType.HOME])
        world.move_agent(agent_id, home)
        pop.mask_worn[agent_id] = np.int8(MaskType.NONE)
        return True
    outcome, worn = mask_decision(world, agent_id, target, stream)
    if outcome is MaskOutcome.REFUSE:
        return False
    if entry_factor < 1.0 and stream.uniform01() >= entry_factor:
        return False
    capacity = int(locs.capacity[target])
    if capacity != NO_ID and len(locs.present[target]) + 1 > capacity:
        return False
    world.move_agent(agent_id, target)
    pop.mask_worn[agent_id] = np.int8(worn)
    return True


def perform_movement(world: World, agent_id: int, t: float, dt: float, ctx: StepContext) -> None:
    """Single-agent movement for the step window [t, t + dt).

    Core rules move unconditionally; quarantined agents perform no trips;
    otherwise scheduled trips (or the extended-rule fallback) pass through
    the gate pipeline. ``dt`` is in days.
    """
    pop = world.pop
    forced = core_rule(world, agent_id, t)
    if forced is not None:
        world.move_agent(agent_id, forced)
        pop.mask_worn[agent_id] = np.int8(MaskType.NONE)
        return
    state = InfectionState(int(pop.state[agent_id]))
    if state in (InfectionState.SEVERE, InfectionState.CRITICAL, InfectionState.DEAD):
        return
    if not np.isnan(pop.quarantine_start[agent_id]):
        return

    candidates: list[tuple[int, int, int]] = []  # (minute_of_day, target, activity)
    minute0 = int(round(t * 24.0 * 60.0))
    dt_minutes = max(1, int(round(dt * 24.0 * 60.0)))
    minute_of_week = (world.t0_weekday * 1440 + minute0) % MINUTES_PER_WEEK
    plan = world.trips
    if plan is not None and plan.covered[agent_id]:
        idx = plan.indices_in_window(minute_of_week, dt_minutes)
        for i in idx:
            if plan.agent[i] == agent_id:
                candidates.append((int(plan.start_minute[i]), int(plan.target[i]), int(plan.activity[i])))
    else:
        hit = extended_rule(world, agent_id, t)
        if hit is not None:
            candidates.append((minute0 % 1440, hit[0], int(hit[1])))
    if ctx.extra_trips is not None:
        ids, targets, activities, minutes = ctx.extra_trips
        m0_day = minute0 % 1440
        for j in np.flatnonzero(ids == agent_id):
            if m0_day <= int(minutes[j]) < m0_day + dt_minutes:
                candidates.append((int(minutes[j]), int(targets[j]), int(activities[j])))
    candidates.sort(key=lambda c: c[0])

    stream = Stream(world.rng_key, agent_id, int(pop.rng_counter[agent_id]))
    for _minute, target, activity in candidates:
        _attempt_trip(world, agent_id, target, activity, t, ctx, stream)
        if not np.isnan(pop.quarantine_start[agent_id]):
            break
    pop.rng_counter[agent_id] = stream.counter
