"""Testing, quarantine, masks, venue restrictions and vaccination protection.

A TestingStrategy is a list of TestingSchemes plus trip-based voluntary
testing. A scheme is evaluated when an agent tries to enter a targeted
location; voluntary tests are evaluated once for every attempted trip,
symptomatic agents with probability ``p_symptomatic`` and others with
``p_symptomatic / ratio_nonsymptomatic`` (both scaled by the schedule's
time-varying testing multiplier).

Entry-gate RNG order per attempted trip (fixed, all from the traveling
agent's own stream): voluntary-test decision, voluntary test result, then
per applicable scheme the perform-probability draw and the test result.
A positive result anywhere sends the agent home into quarantine.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Optional, Sequence

import numpy as np

from .core import LocationType, MaskType, NO_ID, NpiRecord, World
from .infection import SYMPTOMATIC_STATES, InfectionState
from .rng import Stream

#: states in which an agent counts as currently infected for test results
_DETECTABLE = frozenset({InfectionState.NO_SYMPTOMS, InfectionState.MILD,
                         InfectionState.SEVERE, InfectionState.CRITICAL})


@dataclass(frozen=True)
class TestType:
    name: str
    sensitivity: float
    specificity: float
    validity_days: float = 1.0

    def __post_init__(self):
        for p in (self.sensitivity, self.specificity):
            if not 0.0 <= p <= 1.0:
                raise ValueError("sensitivity/specificity must be in [0, 1]")
        if self.validity_days < 0:
            raise ValueError("validity must be >= 0")


ANTIGEN_TEST = TestType("antigen", sensitivity=0.71, specificity=0.996, validity_days=1.0)
PCR_TEST = TestType("pcr", sensitivity=0.95, specificity=0.999, validity_days=2.0)


class SymptomTarget(Enum):
    ANY = "any"
    SYMPTOMATIC = "symptomatic"
    NONSYMPTOMATIC = "nonsymptomatic"


@dataclass(frozen=True)
class TestingCriteria:
    """When / who / where a testing scheme applies.

    The active window is in simulation days, start inclusive, end exclusive.
    ``ages`` and the two location filters of ``None`` mean "all".
    """

    start_day: float = 0.0
    end_day: float = float("inf")
    ages: Optional[frozenset] = None
    symptoms: SymptomTarget = SymptomTarget.ANY
    location_types: Optional[frozenset] = None
    location_ids: Optional[frozenset] = None

    def __post_init__(self):
        if self.end_day < self.start_day:
            raise ValueError("criteria window must be well-ordered")

    def matches(self, world: World, agent_id: int, location_id: int, t: float) -> bool:
        if not self.start_day <= t < self.end_day:
            return False
        if self.ages is not None and int(world.pop.age[agent_id]) not in self.ages:
            return False
        state = InfectionState(int(world.pop.state[agent_id]))
        symptomatic = state in SYMPTOMATIC_STATES
        if self.symptoms is SymptomTarget.SYMPTOMATIC and not symptomatic:
            return False
        if self.symptoms is SymptomTarget.NONSYMPTOMATIC and symptomatic:
            return False
        if self.location_types is None and self.location_ids is None:
            return True
        kind = int(world.locs.kind[location_id])
        if self.location_types is not None and kind in self.location_types:
            return True
        return self.location_ids is not None and location_id in self.location_ids


@dataclass(frozen=True)
class TestingScheme:
    criteria: TestingCriteria
    test: TestType
    probability: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("scheme probability must be in [0, 1]")


@dataclass
class TestingStrategy:
    """Composed schemes plus voluntary trip-based testing parameters."""

    schemes: tuple = ()
    p_symptomatic: float = 0.0
    ratio_nonsymptomatic: float = 4.83
    voluntary_test: TestType = ANTIGEN_TEST

    def __post_init__(self):
        if not 0.0 <= self.p_symptomatic <= 1.0:
            raise ValueError("p_symptomatic must be in [0, 1]")
        if self.ratio_nonsymptomatic <= 0:
            raise ValueError("ratio_nonsymptomatic must be > 0")
        self.schemes = tuple(self.schemes)

    def voluntary_probability(self, symptomatic: bool, multiplier: float = 1.0) -> float:
        p = self.p_symptomatic if symptomatic else self.p_symptomatic / self.ratio_nonsymptomatic
        return min(1.0, p * multiplier)


@dataclass(frozen=True)
class QuarantinePolicy:
    length_days: float = 10.0
    efficiency: float = 0.5

    def __post_init__(self):
        if self.length_days < 0:
            raise ValueError("quarantine length must be >= 0")
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("quarantine efficiency must be in [0, 1]")


@dataclass(frozen=True)
class ProtectionFactor:
    """Piecewise-linear protection against severe progression vs. time since
    immunization. The default is the constant factor used for early-2021
    vaccination campaigns."""

    points: tuple = ((0.0, 0.8),)

    def __post_init__(self):
        if any(not 0.0 <= p <= 1.0 for _, p in self.points):
            raise ValueError("protection values must be in [0, 1]")
        if any(b[0] <= a[0] for a, b in zip(self.points, self.points[1:])):
            raise ValueError("breakpoints must be increasing")

    def value(self, days_since: float) -> float:
        xs = [p[0] for p in self.points]
        ys = [p[1] for p in self.points]
        return float(np.interp(days_since, xs, ys))


def perform_test(world: World, agent_id: int, test: TestType, t: float, stream: Stream) -> bool:
    """Administer a test; returns True if positive. Consumes one draw.

    Currently infected agents (neither Susceptible, Exposed, Recovered nor
    Dead) test positive with the test's sensitivity; everyone else with
    1 - specificity. A positive result starts quarantine immediately; a
    negative result is recorded with the test's validity.
    """
    pop = world.pop
    infected = InfectionState(int(pop.state[agent_id])) in _DETECTABLE
    u = stream.uniform01()
    positive = u < (test.sensitivity if infected else 1.0 - test.specificity)
    if positive:
        pop.quarantine_start[agent_id] = t
        if infected and not pop.detected[agent_id]:
            pop.detected[agent_id] = True
    else:
        pop.last_negative_time[agent_id] = t
        pop.last_negative_validity[agent_id] = test.validity_days
    return bool(positive)


def has_valid_negative(world: World, agent_id: int, t: float) -> bool:
    last = world.pop.last_negative_time[agent_id]
    if np.isnan(last):
        return False
    return t - last <= world.pop.last_negative_validity[agent_id]


class GateOutcome(IntEnum):
    ALLOW = 0
    DENY_STAY = 1
    DENY_QUARANTINE = 2


def entry_gate(world: World, agent_id: int, location_id: int, t: float,
               strategy: Optional[TestingStrategy], stream: Stream,
               testing_multiplier: float = 1.0) -> GateOutcome:
    """Evaluate voluntary testing and all applicable schemes for one entry.

    With an empty strategy this is the identity on movement: ALLOW without
    consuming any draw.
    """
    if strategy is None:
        return GateOutcome.ALLOW
    pop = world.pop
    symptomatic = InfectionState(int(pop.state[agent_id])) in SYMPTOMATIC_STATES
    p_vol = strategy.voluntary_probability(symptomatic, testing_multiplier)
    if p_vol > 0.0 and stream.uniform01() < p_vol:
        if perform_test(world, agent_id, strategy.voluntary_test, t, stream):
            return GateOutcome.DENY_QUARANTINE
    for scheme in strategy.schemes:
        if not scheme.criteria.matches(world, agent_id, location_id, t):
            continue
        if has_valid_negative(world, agent_id, t):
            continue
        if scheme.probability <= 0.0:
            continue
        if scheme.probability < 1.0 and stream.uniform01() >= scheme.probability:
            continue
        if perform_test(world, agent_id, scheme.test, t, stream):
            return GateOutcome.DENY_QUARANTINE
    return GateOutcome.ALLOW


def quarantine_check(world: World, agent_id: int, t: float, policy: QuarantinePolicy) -> bool:
    """True while quarantine is active; clears the start stamp on release."""
    start = world.pop.quarantine_start[agent_id]
    if np.isnan(start):
        return False
    if t < start + policy.length_days:
        return True
    world.pop.quarantine_start[agent_id] = np.nan
    return False


class MaskOutcome(Enum):
    WEAR = "wear"
    BARE = "bare"
    REFUSE = "refuse"


def mask_decision(world: World, agent_id: int, location_id: int,
                  stream: Stream) -> tuple[MaskOutcome, MaskType]:
    """Decide mask behavior for entering a location.

    Under a mandate, negative compliance refuses (and is denied entry) with
    probability |c|, otherwise the agent wears the required type or its own
    stricter mask. Without a mandate, positive compliance wears voluntarily
    with probability c.
    """
    pop, locs = world.pop, world.locs
    kind = int(locs.kind[location_id])
    c = float(pop.compliance[agent_id, kind])
    required = int(locs.mask_required[location_id])
    if required >= 0:
        if c < 0.0 and stream.uniform01() < -c:
            return MaskOutcome.REFUSE, MaskType.NONE
        worn = max(required, int(pop.mask_owned[agent_id]))
        return MaskOutcome.WEAR, MaskType(worn)
    if c > 0.0 and stream.uniform01() < c:
        owned = MaskType(int(pop.mask_owned[agent_id]))
        if owned is not MaskType.NONE:
            return MaskOutcome.WEAR, owned
    return MaskOutcome.BARE, MaskType.NONE


def severe_protection(world: World, agent_id: int, t: float) -> float:
    """Multiplier on the severe-progression probability (1 for unprotected)."""
    if not world.pop.vaccinated[agent_id]:
        return 1.0
    curve: ProtectionFactor = world.params.vaccination
    vacc_time = next((tt for kind, tt, _ in reversed(world.pop.history[agent_id])
                      if kind == "vaccination"), None)
    since = 0.0 if vacc_time is None else max(0.0, t - vacc_time)
    return 1.0 - curve.value(since)


# -- venue restrictions and the intervention timeline -------------------------

@dataclass(frozen=True)
class RestrictionWindow:
    """A restriction record applied to venues over a day window.

    ``target`` is either a LocationType (applies to every venue of the type)
    or an explicit tuple of location ids. ``None`` fields leave the venue's
    base value untouched.
    """

    day_start: int
    day_end: int  # exclusive
    target: object
    entry_factor: Optional[float] = None
    contact_scale: Optional[float] = None
    mask_required: Optional[MaskType] = None
    capacity: Optional[int] = None

    def active(self, day: int) -> bool:
        return self.day_start <= day < self.day_end

    def fields(self):
        return {name: getattr(self, name)
                for name in ("entry_factor", "contact_scale", "mask_required", "capacity")
                if getattr(self, name) is not None}


@dataclass(frozen=True)
class GlobalWindow:
    """Schedule window overriding global step-context values."""

    day_start: int
    day_end: int
    psi: Optional[float] = None
    contact_reduction: Optional[float] = None
    testing_multiplier: Optional[float] = None

    def active(self, day: int) -> bool:
        return self.day_start <= day < self.day_end


@dataclass
class Schedule:
    """Intervention timeline: venue restrictions, global overrides, events.

    ``special_trips`` maps absolute day -> arrays (agent_ids, targets,
    activities, start_minutes) of extra one-off trips for that day.
    """

    restrictions: list = field(default_factory=list)
    globals: list = field(default_factory=list)
    special_trips: dict = field(default_factory=dict)
    _base: Optional[dict] = None

    def add_restriction(self, window: RestrictionWindow) -> None:
        new_fields = window.fields()
        for other in self.restrictions:
            if other.target != window.target:
                continue
            if window.day_end <= other.day_start or other.day_end <= window.day_start:
                continue
            clash = {k for k in new_fields if k in other.fields() and other.fields()[k] != new_fields[k]}
            if clash:
                raise ValueError(f"contradictory overlapping restriction on {sorted(clash)}")
        self.restrictions.append(window)

    def add_global(self, window: GlobalWindow) -> None:
        self.globals.append(window)

    def snapshot_base(self, world: World) -> None:
        """Remember pre-schedule venue fields so day resolution can reset."""
        locs = world.locs
        self._base = {
            "entry_factor": locs.entry_factor.copy(),
            "contact_scale": locs.contact_scale.copy(),
            "mask_required": locs.mask_required.copy(),
            "capacity": locs.capacity.copy(),
        }

    def _target_ids(self, world: World, target) -> np.ndarray:
        if isinstance(target, LocationType) or isinstance(target, int):
            return np.flatnonzero(world.locs.kind == int(target))
        return np.asarray(sorted(target), dtype=np.int64)

    def materialize_day(self, world: World, day: int) -> None:
        """Reset venue fields to base and apply the day's active windows."""
        locs = world.locs
        if self._base is None:
            self.snapshot_base(world)
        if len(self._base["entry_factor"]) != len(locs):
            raise RuntimeError("schedule base snapshot is stale; re-snapshot after adding venues")
        locs.entry_factor[:] = self._base["entry_factor"]
        locs.contact_scale[:] = self._base["contact_scale"]
        locs.mask_required[:] = self._base["mask_required"]
        locs.capacity[:] = self._base["capacity"]
        for window in self.restrictions:
            if not window.active(day):
                continue
            ids = self._target_ids(world, window.target)
            if window.entry_factor is not None:
                locs.entry_factor[ids] = window.entry_factor
            if window.contact_scale is not None:
                locs.contact_scale[ids] = window.contact_scale
            if window.mask_required is not None:
                locs.mask_required[ids] = np.int8(window.mask_required)
            if window.capacity is not None:
                locs.capacity[ids] = np.int32(window.capacity if window.capacity is not None else NO_ID)

    def resolve_globals(self, day: int, default_psi: float, default_r: float) -> tuple[float, float, float]:
        psi, r, mult = default_psi, default_r, 1.0
        for window in self.globals:
            if not window.active(day):
                continue
            if window.psi is not None:
                psi = window.psi
            if window.contact_reduction is not None:
                r = window.contact_reduction
            if window.testing_multiplier is not None:
                mult = mult * window.testing_multiplier
        return psi, r, mult


def apply_restriction(world: World, target, window: tuple, *, entry_factor=None,
                      contact_scale=None, mask_required=None, capacity=None) -> None:
    """Register a venue restriction for a day window on the world's schedule.

    ``target`` is a LocationType or an iterable of location ids; closure is
    expressed as ``entry_factor=0``. Contradictory overlapping windows on
    the same field raise at registration.
    """
    if world.schedule is None:
        world.schedule = Schedule()
    day_start, day_end = int(window[0]), int(window[1])
    world.schedule.add_restriction(RestrictionWindow(
        day_start=day_start, day_end=day_end, target=target,
        entry_factor=entry_factor, contact_scale=contact_scale,
        mask_required=mask_required, capacity=capacity,
    ))
