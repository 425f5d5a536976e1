"""Scenario ingestion, synthetic population generation, initialization.

A scenario is a directory with a ``scenario.json`` document plus CSV tables:

* ``venues.csv``: id, kind, capacity (empty = unbounded)
* ``agents.csv``: id, age_group, home, work, school, shop, event, vaccinated
* ``trips.csv``: agent_id, weekday, start_minute, target_location_id, activity
* ``contacts/``: one 6x6 CSV per location type (receiver rows, source cols)
* ``reported.csv`` (optional): day, cases_a0..a5, icu, deaths, vacc_a0..a5

All CSVs carry header rows, UTF-8, '.' decimal separator. Ids are dense.
Hospital, ICU and Cemetery are singleton venues; when a scenario does not
define them they are created and assigned to every agent automatically.

The JSON document carries the parameter overrides, the testing strategy,
initialization instructions and the policy windows (lockdown, holiday) from
which ``build_schedule`` constructs the intervention timeline.
"""

from __future__ import annotations

import csv
import dataclasses
import datetime
import json
import math
import pickle
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import defaults as _defaults
from . import rng as _rng
from .core import (AgeGroup, LocationType, MaskType, NO_ID, N_AGE_GROUPS,
                   N_LOCATION_TYPES, World)
from .infection import (CourseParams, InfectionCourse, InfectionState,
                        Infection, ViralCurve, ViralParams, draw_infection,
                        INFECTIOUS_STATES)
from .interventions import (GlobalWindow, ProtectionFactor, QuarantinePolicy,
                            Schedule, TestType, TestingStrategy)
from .mobility import Activity, ExtendedRules, ReductionWindow, TripPlan, activity_from_name
from .transmission import ContactMatrices, TransmissionParams

_BIG_DAY = 10**6


@dataclass
class TestingConfig:
    """Scalars from which the world's TestingStrategy is built."""

    p_symptomatic: float = _defaults.P_SYMPTOMATIC_TEST
    ratio_nonsymptomatic: float = _defaults.RATIO_NONSYMPTOMATIC
    test: TestType = _defaults.DEFAULT_TEST
    lockdown_scale: float = _defaults.LOCKDOWN_TESTING_SCALE
    holiday_scale: float = _defaults.HOLIDAY_TESTING_SCALE


@dataclass
class PolicyParams:
    """Schedule-construction values: contact reductions, trip retentions."""

    contact_reduction_lockdown: float = _defaults.CONTACT_REDUCTION_LOCKDOWN
    contact_reduction_after: float = _defaults.CONTACT_REDUCTION_AFTER
    retention_normal: dict = field(default_factory=lambda: dict(_defaults.RETENTION_NORMAL))
    retention_lockdown: dict = field(default_factory=lambda: dict(_defaults.RETENTION_LOCKDOWN))
    holiday_participation: float = _defaults.HOLIDAY_PARTICIPATION


@dataclass
class ParameterSet:
    """Every tunable of the model, grouped by subsystem."""

    viral: ViralParams = field(default_factory=_defaults.default_viral_params)
    course: CourseParams = field(default_factory=_defaults.default_course_params)
    transmission: TransmissionParams = field(default_factory=_defaults.default_transmission_params)
    contacts: ContactMatrices = field(default_factory=_defaults.default_contact_matrices)
    quarantine: QuarantinePolicy = field(default_factory=_defaults.default_quarantine)
    vaccination: ProtectionFactor = field(default_factory=_defaults.default_vaccination)
    mask_compliance: tuple = _defaults.MASK_COMPLIANCE
    testing: TestingConfig = field(default_factory=TestingConfig)
    dark_figure: float = _defaults.DARK_FIGURE
    policy: PolicyParams = field(default_factory=PolicyParams)

    def to_dict(self) -> dict:
        """JSON-ready dictionary (contact matrices live in their own files)."""
        return {
            "viral": dataclasses.asdict(self.viral),
            "course": dataclasses.asdict(self.course),
            "transmission": {
                "infection_coefficient": self.transmission.infection_coefficient,
                "seasonality": {str(k): v for k, v in self.transmission.seasonality.items()},
                "contact_reduction": self.transmission.contact_reduction,
                "mask_transmit": list(self.transmission.mask_transmit),
                "mask_receive": list(self.transmission.mask_receive),
            },
            "quarantine": dataclasses.asdict(self.quarantine),
            "vaccination": {"points": [list(p) for p in self.vaccination.points]},
            "mask_compliance": list(self.mask_compliance),
            "testing": {
                "p_symptomatic": self.testing.p_symptomatic,
                "ratio_nonsymptomatic": self.testing.ratio_nonsymptomatic,
                "test": dataclasses.asdict(self.testing.test),
                "lockdown_scale": self.testing.lockdown_scale,
                "holiday_scale": self.testing.holiday_scale,
            },
            "dark_figure": self.dark_figure,
            "policy": dataclasses.asdict(self.policy),
        }

    @classmethod
    def from_dict(cls, data: dict, contacts: Optional[ContactMatrices] = None) -> "ParameterSet":
        base = cls() if contacts is None else cls(contacts=contacts)
        if not data:
            return base
        if "viral" in data:
            base.viral = ViralParams(**data["viral"])
        if "course" in data:
            course = data["course"]
            course = {k: tuple(v) if isinstance(v, list) else v for k, v in course.items()}
            base.course = CourseParams(**course)
        if "transmission" in data:
            tr = dict(data["transmission"])
            if "seasonality" in tr:
                tr["seasonality"] = {int(k): float(v) for k, v in tr["seasonality"].items()}
            for key in ("mask_transmit", "mask_receive"):
                if key in tr:
                    tr[key] = tuple(tr[key])
            base.transmission = TransmissionParams(**tr)
        if "quarantine" in data:
            base.quarantine = QuarantinePolicy(**data["quarantine"])
        if "vaccination" in data:
            base.vaccination = ProtectionFactor(
                points=tuple(tuple(p) for p in data["vaccination"]["points"]))
        if "mask_compliance" in data:
            base.mask_compliance = tuple(data["mask_compliance"])
        if "testing" in data:
            ts = dict(data["testing"])
            if "test" in ts:
                ts["test"] = TestType(**ts["test"])
            base.testing = TestingConfig(**ts)
        if "dark_figure" in data:
            base.dark_figure = float(data["dark_figure"])
        if "policy" in data:
            base.policy = PolicyParams(**data["policy"])
        return base


def default_parameters() -> ParameterSet:
    return ParameterSet()


def make_testing_strategy(config: TestingConfig, schemes=()) -> TestingStrategy:
    return TestingStrategy(schemes=tuple(schemes),
                           p_symptomatic=config.p_symptomatic,
                           ratio_nonsymptomatic=config.ratio_nonsymptomatic,
                           voluntary_test=config.test)


# -- reported data -------------------------------------------------------------


@dataclass
class ReportedData:
    """Daily reported series relative to the simulation start day.

    ``days`` may include negative entries (pre-simulation history used for
    the active-case window). Cumulative series must be non-decreasing.
    """

    days: np.ndarray
    cum_cases: np.ndarray          # (n, 6)
    icu: np.ndarray                # (n,)
    cum_deaths: np.ndarray         # (n,)
    vaccinated_by_age: Optional[np.ndarray] = None  # (6,) count at day 0

    def __post_init__(self):
        self.days = np.asarray(self.days, dtype=np.int64)
        self.cum_cases = np.asarray(self.cum_cases, dtype=np.float64)
        self.icu = np.asarray(self.icu, dtype=np.float64)
        self.cum_deaths = np.asarray(self.cum_deaths, dtype=np.float64)
        if (np.diff(self.cum_cases, axis=0) < 0).any() or (np.diff(self.cum_deaths) < 0).any():
            raise ValueError("cumulative series must be non-decreasing")

    def cum_cases_at(self, day: int) -> np.ndarray:
        """Step-function lookup; days before the first record count as zero."""
        idx = int(np.searchsorted(self.days, day, side="right")) - 1
        if idx < 0:
            return np.zeros(N_AGE_GROUPS)
        return self.cum_cases[idx]

    def active_cases(self, day: int, window_days: int = 14) -> np.ndarray:
        """Recent-window heuristic for currently active reported cases."""
        return self.cum_cases_at(day) - self.cum_cases_at(day - window_days)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["day"] + [f"cases_a{g}" for g in range(6)] + ["icu", "deaths"]
            if self.vaccinated_by_age is not None:
                header += [f"vacc_a{g}" for g in range(6)]
            writer.writerow(header)
            for i, day in enumerate(self.days):
                row = [int(day)] + [format(c, ".10g") for c in self.cum_cases[i]]
                row += [format(self.icu[i], ".10g"), format(self.cum_deaths[i], ".10g")]
                if self.vaccinated_by_age is not None:
                    row += ([format(v, ".10g") for v in self.vaccinated_by_age]
                            if i == 0 else [""] * 6)
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "ReportedData":
        with open(path, newline="") as fh:
            rows = [r for r in csv.DictReader(_strip_comments(fh))]
        days = [int(r["day"]) for r in rows]
        cases = [[float(r[f"cases_a{g}"]) for g in range(6)] for r in rows]
        icu = [float(r["icu"]) for r in rows]
        deaths = [float(r["deaths"]) for r in rows]
        vacc = None
        if rows and "vacc_a0" in rows[0] and rows[0]["vacc_a0"] not in ("", None):
            vacc = np.array([float(rows[0][f"vacc_a{g}"]) for g in range(6)])
        return cls(np.array(days), np.array(cases), np.array(icu), np.array(deaths), vacc)


def _strip_comments(fh):
    return (line for line in fh if not line.startswith("#"))


def estimate_death_day(t_report: int, course: CourseParams) -> int:
    """Extrapolated death day from the report day and mean stage durations."""
    mean_sum = (course.t_mild_to_severe[0] + course.t_severe_to_critical[0]
                + course.t_critical_to_dead[0])
    return int(t_report + math.floor(mean_sum))


# -- synthetic populations -------------------------------------------------------


@dataclass
class SynthSpec:
    """Recipe for a synthetic city: counts, mixes, venue sizing."""

    n_agents: int
    age_mix: tuple = (0.05, 0.09, 0.26, 0.35, 0.19, 0.06)
    household_sizes: dict = field(default_factory=lambda: {1: 0.42, 2: 0.33, 3: 0.12, 4: 0.09, 5: 0.04})
    school_size: int = 600
    work_size: int = 100
    shop_catchment: int = 200
    event_catchment: int = 300
    trips_shop_per_week: int = 2
    trips_event_per_week: int = 1

    def __post_init__(self):
        if self.n_agents <= 0:
            raise ValueError("n_agents must be > 0")
        if abs(sum(self.age_mix) - 1.0) > 1e-9:
            raise ValueError("age mix must sum to 1")
        if abs(sum(self.household_sizes.values()) - 1.0) > 1e-9:
            raise ValueError("household size distribution must sum to 1")


class _SeqDraws:
    """Sequential batched uniforms from one system subsequence."""

    def __init__(self, key: int, index: int):
        self.key = key
        self.index = index
        self.counter = 0

    def uniforms(self, n: int) -> np.ndarray:
        if n == 0:
            return np.empty(0)
        counters = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        if counters.size and counters[-1] > _rng.MAX_LOCAL_COUNTER:
            raise _rng.StreamExhausted("synthesis stream exhausted")
        words = _rng.generate_words(self.key, np.full(n, self.index, dtype=np.uint32),
                                    counters.astype(np.uint32))
        self.counter += n
        return _rng.words_to_uniform01(words)


def _synth_tables(spec: SynthSpec, seed: int):
    """Deterministic population/venue/trip tables for a synthetic city."""
    draws = _SeqDraws(seed, _rng.STREAM_SYNTH)
    n = spec.n_agents

    mix = np.cumsum(spec.age_mix)
    ages = np.searchsorted(mix, draws.uniforms(n), side="right").astype(np.int8)
    ages = np.minimum(ages, N_AGE_GROUPS - 1)

    sizes = sorted(spec.household_sizes)
    size_cum = np.cumsum([spec.household_sizes[s] for s in sizes])
    avg = sum(s * p for s, p in spec.household_sizes.items())
    households: list[int] = []
    remaining = n
    while remaining > 0:
        batch = max(8, int(remaining / avg) + 4)
        picks = np.searchsorted(size_cum, draws.uniforms(batch), side="right")
        for p in picks:
            size = sizes[min(int(p), len(sizes) - 1)]
            size = min(size, remaining)
            households.append(size)
            remaining -= size
            if remaining == 0:
                break
    home_of_agent = np.repeat(np.arange(len(households)), households)

    n_school_kids = int((ages == AgeGroup.AGE_5_14).sum())
    n_workers = int(np.isin(ages, (AgeGroup.AGE_15_34, AgeGroup.AGE_35_59)).sum())
    n_homes = len(households)
    n_schools = max(1, math.ceil(n_school_kids / spec.school_size))
    n_works = max(1, math.ceil(max(1, n_workers) / spec.work_size))
    n_shops = max(1, math.ceil(n / spec.shop_catchment))
    n_events = max(1, math.ceil(n / spec.event_catchment))

    kinds = ([int(LocationType.HOME)] * n_homes + [int(LocationType.SCHOOL)] * n_schools
             + [int(LocationType.WORK)] * n_works + [int(LocationType.BASIC_SHOP)] * n_shops
             + [int(LocationType.SOCIAL_EVENT)] * n_events
             + [int(LocationType.HOSPITAL), int(LocationType.ICU), int(LocationType.CEMETERY)])
    kinds = np.array(kinds, dtype=np.int8)
    first_school = n_homes
    first_work = first_school + n_schools
    first_shop = first_work + n_works
    first_event = first_shop + n_shops
    hospital, icu, cemetery = first_event + n_events, first_event + n_events + 1, first_event + n_events + 2

    assigned = np.full((n, N_LOCATION_TYPES), NO_ID, dtype=np.int32)
    assigned[:, LocationType.HOME] = home_of_agent
    assigned[:, LocationType.HOSPITAL] = hospital
    assigned[:, LocationType.ICU] = icu
    assigned[:, LocationType.CEMETERY] = cemetery
    assigned[:, LocationType.BASIC_SHOP] = first_shop + (draws.uniforms(n) * n_shops).astype(np.int32)
    assigned[:, LocationType.SOCIAL_EVENT] = first_event + (draws.uniforms(n) * n_events).astype(np.int32)
    kid_rows = np.flatnonzero(ages == AgeGroup.AGE_5_14)
    assigned[kid_rows, LocationType.SCHOOL] = first_school + (
        draws.uniforms(len(kid_rows)) * n_schools).astype(np.int32)
    worker_rows = np.flatnonzero(np.isin(ages, (AgeGroup.AGE_15_34, AgeGroup.AGE_35_59)))
    assigned[worker_rows, LocationType.WORK] = first_work + (
        draws.uniforms(len(worker_rows)) * n_works).astype(np.int32)

    # weekly trip chains per extended-rule templates, randomized times
    t_agent, t_weekday, t_minute, t_target, t_activity = [], [], [], [], []

    def add_trip(aid, weekday, minute, target, activity):
        t_agent.append(aid)
        t_weekday.append(weekday)
        t_minute.append(minute)
        t_target.append(target)
        t_activity.append(int(activity))

    u_school = draws.uniforms(2 * len(kid_rows))
    for j, aid in enumerate(kid_rows):
        go = 7 + int(u_school[2 * j] * 2)
        back = 14 + int(u_school[2 * j + 1] * 3)
        for wd in range(5):
            add_trip(aid, wd, go * 60, assigned[aid, LocationType.SCHOOL], Activity.SCHOOL)
            add_trip(aid, wd, back * 60, assigned[aid, LocationType.HOME], Activity.HOME)
    u_work = draws.uniforms(2 * len(worker_rows))
    for j, aid in enumerate(worker_rows):
        go = 7 + int(u_work[2 * j] * 3)
        back = 16 + int(u_work[2 * j + 1] * 3)
        for wd in range(5):
            add_trip(aid, wd, go * 60, assigned[aid, LocationType.WORK], Activity.WORK)
            add_trip(aid, wd, back * 60, assigned[aid, LocationType.HOME], Activity.HOME)
    adult_rows = np.flatnonzero(ages >= AgeGroup.AGE_15_34)
    u_shop = draws.uniforms(2 * spec.trips_shop_per_week * len(adult_rows))
    u_event = draws.uniforms(2 * spec.trips_event_per_week * len(adult_rows))
    k = 0
    for aid in adult_rows:
        for _ in range(spec.trips_shop_per_week):
            wd = int(u_shop[k] * 7)
            hour = 10 + int(u_shop[k + 1] * 9)
            add_trip(aid, wd, hour * 60, assigned[aid, LocationType.BASIC_SHOP], Activity.SHOP)
            add_trip(aid, wd, (hour + 1) * 60, assigned[aid, LocationType.HOME], Activity.HOME)
            k += 2
    k = 0
    for aid in adult_rows:
        for _ in range(spec.trips_event_per_week):
            wd = int(u_event[k] * 7)
            hour = 18 + int(u_event[k + 1] * 3)
            add_trip(aid, wd, hour * 60, assigned[aid, LocationType.SOCIAL_EVENT], Activity.EVENT)
            back_hour = hour + 3
            back_wd = wd if back_hour < 24 else (wd + 1) % 7
            add_trip(aid, back_wd, (back_hour % 24) * 60, assigned[aid, LocationType.HOME], Activity.HOME)
            k += 2

    trips = (np.array(t_agent, dtype=np.int64), np.array(t_weekday, dtype=np.int8),
             np.array(t_minute, dtype=np.int16), np.array(t_target, dtype=np.int32),
             np.array(t_activity, dtype=np.int8))
    return ages, assigned, kinds, trips


def _trip_plan_from_arrays(agent, weekday, minute, target, activity, n_agents) -> TripPlan:
    plan = TripPlan([], n_agents)
    tow = weekday.astype(np.int32) * 1440 + minute
    order = np.argsort(tow, kind="stable")
    plan.agent = agent[order]
    plan.weekday = weekday[order]
    plan.start_minute = minute[order]
    plan.target = target[order]
    plan.activity = activity[order]
    plan.time_of_week = tow[order]
    plan.covered = np.zeros(n_agents, dtype=bool)
    if len(plan.agent):
        plan.covered[plan.agent] = True
    return plan


def build_synthetic_world(spec: SynthSpec, scenario_seed: int, run_key: int,
                          params: Optional[ParameterSet] = None,
                          initial_infections: int = 0,
                          schemes=()) -> World:
    """In-memory synthetic world; tables depend only on (spec, scenario_seed).

    The run key drives everything stochastic after construction (initial
    infection placement included), so one city supports many runs.
    """
    params = params if params is not None else default_parameters()
    ages, assigned, kinds, trips = _synth_tables(spec, scenario_seed)
    world = World(rng_key=run_key)
    world.locs.add_bulk(kinds)
    compliance = np.tile(np.asarray(params.mask_compliance), (spec.n_agents, 1))
    world.add_agents_bulk(ages, assigned, compliance)
    world.trips = _trip_plan_from_arrays(*trips, n_agents=spec.n_agents)
    world.params = params
    world.testing = make_testing_strategy(params.testing, schemes)
    world.schedule = Schedule()
    world.extended_rules = ExtendedRules()
    _apply_default_retentions(world, lockdown=None)
    if initial_infections:
        seed_infections(world, initial_infections)
    return world


def _apply_default_retentions(world: World, lockdown: Optional[tuple]) -> None:
    policy = world.params.policy
    name_to_activity = {"school": Activity.SCHOOL, "work": Activity.WORK,
                        "shop": Activity.SHOP, "event": Activity.EVENT}
    for name, activity in name_to_activity.items():
        normal = policy.retention_normal.get(name, 1.0)
        if lockdown is None:
            world.trips.add_reduction(ReductionWindow(activity, 0, _BIG_DAY, normal))
        else:
            d0, d1 = lockdown
            world.trips.add_reduction(ReductionWindow(activity, 0, d0, normal))
            world.trips.add_reduction(ReductionWindow(
                activity, d0, d1, policy.retention_lockdown.get(name, normal)))
            world.trips.add_reduction(ReductionWindow(activity, d1, _BIG_DAY, normal))


def synth_population(spec: SynthSpec, out_dir, seed: int,
                     params: Optional[ParameterSet] = None,
                     initial_infections: int = 0,
                     name: str = "synthetic") -> Path:
    """Write a complete scenario directory; deterministic in (spec, seed)."""
    params = params if params is not None else default_parameters()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ages, assigned, kinds, trips = _synth_tables(spec, seed)

    with open(out_dir / "venues.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "kind", "capacity"])
        for lid, kind in enumerate(kinds):
            writer.writerow([lid, LocationType(int(kind)).name.lower(), ""])
    with open(out_dir / "agents.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "age_group", "home", "work", "school", "shop", "event", "vaccinated"])
        for aid in range(spec.n_agents):
            row = assigned[aid]
            writer.writerow([
                aid, int(ages[aid]), int(row[LocationType.HOME]),
                _blank(row[LocationType.WORK]), _blank(row[LocationType.SCHOOL]),
                _blank(row[LocationType.BASIC_SHOP]), _blank(row[LocationType.SOCIAL_EVENT]), 0,
            ])
    with open(out_dir / "trips.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent_id", "weekday", "start_minute", "target_location_id", "activity"])
        t_agent, t_weekday, t_minute, t_target, t_activity = trips
        for i in range(len(t_agent)):
            writer.writerow([int(t_agent[i]), int(t_weekday[i]), int(t_minute[i]),
                             int(t_target[i]), Activity(int(t_activity[i])).name.lower()])
    params.contacts.save(out_dir / "contacts")
    doc = {
        "schema_version": 1,
        "name": name,
        "t0_date": None,
        "t0_weekday": 0,
        "files": {"agents": "agents.csv", "venues": "venues.csv",
                  "trips": "trips.csv", "contacts": "contacts"},
        "params": params.to_dict(),
        "initial_infections": {"count": int(initial_infections)},
        "policy_windows": {"lockdown": None, "easter_sunday": None},
        "synth": {"spec_seed": int(seed)},
    }
    with open(out_dir / "scenario.json", "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return out_dir / "scenario.json"


def _blank(v) -> str:
    return "" if int(v) == NO_ID else str(int(v))


# -- scenario loading ------------------------------------------------------------


_KIND_NAMES = {k.name.lower(): k for k in LocationType}


def load_scenario(path, run_key: int = 0, fit_overrides: Optional[dict] = None,
                  initialize: bool = True) -> World:
    """Assemble a World from a scenario directory or scenario.json path.

    ``fit_overrides`` (fit-dimension name -> value) are applied to the
    parameters before the schedule is built and infections are seeded, so
    fitted quantities like the lockdown contact reduction or the dark
    figure take full effect.
    """
    path = Path(path)
    doc_path = path if path.is_file() else path / "scenario.json"
    base = doc_path.parent
    with open(doc_path) as fh:
        doc = json.load(fh)
    if doc.get("schema_version") != 1:
        raise ValueError(f"unsupported schema_version {doc.get('schema_version')!r}")
    files = doc["files"]

    contacts = None
    if files.get("contacts"):
        contacts = ContactMatrices.load(base / files["contacts"])
    params = ParameterSet.from_dict(doc.get("params", {}), contacts)
    if fit_overrides:
        from .calibrate import apply_fit_params

        apply_fit_params(params, fit_overrides)

    world = World(rng_key=run_key)
    world.params = params
    if doc.get("t0_date"):
        world.t0_date = datetime.date.fromisoformat(doc["t0_date"])
        world.t0_weekday = world.t0_date.weekday()
    else:
        world.t0_weekday = int(doc.get("t0_weekday", 0))

    kinds, caps = [], []
    with open(base / files["venues"], newline="") as fh:
        for i, row in enumerate(csv.DictReader(_strip_comments(fh))):
            if int(row["id"]) != i:
                raise ValueError(f"venues.csv row {i}: ids must be dense ascending")
            kinds.append(int(_KIND_NAMES[row["kind"].strip().lower()]))
            caps.append(NO_ID if row.get("capacity", "") in ("", None) else int(row["capacity"]))
    kinds = np.array(kinds, dtype=np.int8)
    world.locs.add_bulk(kinds, np.array(caps, dtype=np.int32))

    singleton = {}
    for kind in (LocationType.HOSPITAL, LocationType.ICU, LocationType.CEMETERY):
        existing = np.flatnonzero(kinds == kind)
        singleton[kind] = int(existing[0]) if existing.size else world.locs.add(kind)

    ages, rows, vaccinated = [], [], []
    with open(base / files["agents"], newline="") as fh:
        for i, row in enumerate(csv.DictReader(_strip_comments(fh))):
            if int(row["id"]) != i:
                raise ValueError(f"agents.csv row {i}: ids must be dense ascending")
            ages.append(int(row["age_group"]))
            assigned = np.full(N_LOCATION_TYPES, NO_ID, dtype=np.int32)
            assigned[LocationType.HOME] = int(row["home"])
            for col, slot in (("work", LocationType.WORK), ("school", LocationType.SCHOOL),
                              ("shop", LocationType.BASIC_SHOP), ("event", LocationType.SOCIAL_EVENT)):
                if row.get(col, "") not in ("", None):
                    assigned[slot] = int(row[col])
            for kind, lid in singleton.items():
                assigned[kind] = lid
            rows.append(assigned)
            vaccinated.append(row.get("vaccinated", "0") in ("1", "true", "True"))
    ages = np.array(ages, dtype=np.int8)
    assigned = np.array(rows, dtype=np.int32)
    compliance = np.tile(np.asarray(params.mask_compliance), (len(ages), 1))
    world.add_agents_bulk(ages, assigned, compliance)
    for aid in np.flatnonzero(np.array(vaccinated, dtype=bool)):
        world.record_vaccination(int(aid), t=-30.0)

    trips = []
    if files.get("trips"):
        from .mobility import Trip

        with open(base / files["trips"], newline="") as fh:
            for i, row in enumerate(csv.DictReader(_strip_comments(fh))):
                target = int(row["target_location_id"])
                if not 0 <= target < len(world.locs):
                    raise ValueError(f"trips.csv row {i}: unknown location {target}")
                agent_id = int(row["agent_id"])
                if not 0 <= agent_id < len(world.pop):
                    raise ValueError(f"trips.csv row {i}: unknown agent {agent_id}")
                trips.append(Trip(agent_id, int(row["weekday"]), int(row["start_minute"]),
                                  target, activity_from_name(row["activity"])))
    world.trips = TripPlan(trips, len(world.pop))
    world.testing = make_testing_strategy(params.testing)
    world.schedule = Schedule()
    world.extended_rules = ExtendedRules()

    policy_windows = doc.get("policy_windows", {})
    lockdown = policy_windows.get("lockdown")
    easter = policy_windows.get("easter_sunday")
    build_schedule(world, tuple(lockdown) if lockdown else None,
                   int(easter) if easter is not None else None)

    if initialize:
        init = doc.get("initial_infections", {})
        if init.get("count"):
            seed_infections(world, int(init["count"]))
        elif init.get("from_reports"):
            reported = ReportedData.from_csv(base / files["reported"])
            dark = init["from_reports"].get("dark_figure")
            if dark is None or (fit_overrides and "dark_figure" in fit_overrides):
                dark = params.dark_figure
            init_from_reports(world, reported, float(dark))
    return world


def save_scenario(world: World, out_dir, name: str = "scenario") -> Path:
    """Serialize the modeled scenario fields back to a scenario directory."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    locs, pop = world.locs, world.pop
    with open(out_dir / "venues.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "kind", "capacity"])
        for lid in range(len(locs)):
            cap = int(locs.capacity[lid])
            writer.writerow([lid, LocationType(int(locs.kind[lid])).name.lower(),
                             "" if cap == NO_ID else cap])
    with open(out_dir / "agents.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "age_group", "home", "work", "school", "shop", "event", "vaccinated"])
        for aid in range(len(pop)):
            row = pop.assigned[aid]
            writer.writerow([
                aid, int(pop.age[aid]), int(row[LocationType.HOME]),
                _blank(row[LocationType.WORK]), _blank(row[LocationType.SCHOOL]),
                _blank(row[LocationType.BASIC_SHOP]), _blank(row[LocationType.SOCIAL_EVENT]),
                1 if pop.vaccinated[aid] else 0,
            ])
    with open(out_dir / "trips.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["agent_id", "weekday", "start_minute", "target_location_id", "activity"])
        plan = world.trips
        if plan is not None:
            for i in range(len(plan)):
                writer.writerow([int(plan.agent[i]), int(plan.weekday[i]),
                                 int(plan.start_minute[i]), int(plan.target[i]),
                                 Activity(int(plan.activity[i])).name.lower()])
    world.params.contacts.save(out_dir / "contacts")
    doc = {
        "schema_version": 1,
        "name": name,
        "t0_date": world.t0_date.isoformat() if world.t0_date else None,
        "t0_weekday": world.t0_weekday,
        "files": {"agents": "agents.csv", "venues": "venues.csv",
                  "trips": "trips.csv", "contacts": "contacts"},
        "params": world.params.to_dict(),
        "initial_infections": {"count": 0},
        "policy_windows": {"lockdown": None, "easter_sunday": None},
    }
    with open(out_dir / "scenario.json", "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return out_dir / "scenario.json"


# -- initialization ---------------------------------------------------------------


def _place_backdated_infection(world: World, agent_id: int, backdate_u: float,
                               stage_window_days: float) -> None:
    """Draw a course, shift it into the past, and fast-forward to t = 0."""
    pop = world.pop
    stream = _rng.Stream(world.rng_key, agent_id, int(pop.rng_counter[agent_id]))
    from .interventions import severe_protection

    infection = draw_infection(stream, int(pop.age[agent_id]), 0.0,
                               world.params.course, world.params.viral,
                               severe_multiplier=severe_protection(world, agent_id, 0.0))
    pop.rng_counter[agent_id] = stream.counter
    terminal = infection.course.times[-1]
    back = backdate_u * min(stage_window_days, 0.999 * terminal)
    curve = dataclasses.replace(infection.curve, t_transmission=-back)
    course = InfectionCourse(states=infection.course.states,
                             times=tuple(t - back for t in infection.course.times))
    infection = Infection(variant=infection.variant, curve=curve, course=course)
    world.register_infection(agent_id, infection)
    world.sync_infection_state(agent_id, 0.0)


def seed_infections(world: World, count: int, stage_window_days: float = 3.0,
                    mark_detected: bool = False) -> list[int]:
    """Infect ``count`` uniformly chosen susceptible agents, backdated."""
    pop = world.pop
    sus = np.flatnonzero(pop.state == InfectionState.SUSCEPTIBLE)
    if count > sus.size:
        raise ValueError(f"cannot seed {count} infections into {sus.size} susceptibles")
    draws = _SeqDraws(world.rng_key, _rng.STREAM_INIT_INFECTIONS)
    pool = sus.copy()
    chosen = []
    for i in range(count):
        j = i + int(draws.uniforms(1)[0] * (pool.size - i))
        pool[i], pool[j] = pool[j], pool[i]
        chosen.append(int(pool[i]))
    backdates = draws.uniforms(count)
    for aid, u in zip(chosen, backdates):
        _place_backdated_infection(world, aid, float(u), stage_window_days)
        if mark_detected:
            pop.detected[aid] = True
    return chosen


def init_from_reports(world: World, reports: ReportedData, dark_figure: float,
                      active_window_days: int = 14,
                      stage_window_days: float = 14.0) -> None:
    """Initialize infections as reported active cases times the dark figure.

    Per age group the target count is the recent-window active estimate
    scaled by ``dark_figure``, stochastically rounded. Each seeded agent is
    marked as already detected with probability 1/dark_figure (the reported
    share; the dark-figure excess is undetected by definition), and the
    detected counters start at the reported level. Vaccinations from the
    reports are applied to uniformly chosen agents per group.
    """
    if dark_figure < 1:
        raise ValueError("dark figure must be >= 1")
    pop = world.pop
    draws = _SeqDraws(world.rng_key, _rng.STREAM_INIT_INFECTIONS)
    active = reports.active_cases(0, active_window_days)

    if reports.vaccinated_by_age is not None:
        for group in range(N_AGE_GROUPS):
            want = int(round(reports.vaccinated_by_age[group]))
            candidates = np.flatnonzero((pop.age == group) & ~pop.vaccinated)
            if want > candidates.size:
                raise ValueError(f"group {group}: more vaccinations than agents")
            for i in range(want):
                j = i + int(draws.uniforms(1)[0] * (candidates.size - i))
                candidates[i], candidates[j] = candidates[j], candidates[i]
                world.record_vaccination(int(candidates[i]), t=-30.0)

    for group in range(N_AGE_GROUPS):
        expected = active[group] * dark_figure
        count = int(math.floor(expected))
        if draws.uniforms(1)[0] < expected - count:
            count += 1
        if count == 0:
            continue
        sus = np.flatnonzero((pop.state == InfectionState.SUSCEPTIBLE) & (pop.age == group))
        if count > sus.size:
            raise ValueError(f"group {group}: required infections {count} exceed "
                             f"susceptible pool {sus.size}")
        pool = sus.copy()
        for i in range(count):
            j = i + int(draws.uniforms(1)[0] * (pool.size - i))
            pool[i], pool[j] = pool[j], pool[i]
        chosen = pool[:count]
        backdates = draws.uniforms(count)
        reported_mask = draws.uniforms(count) < 1.0 / dark_figure
        for aid, u, was_reported in zip(chosen, backdates, reported_mask):
            _place_backdated_infection(world, int(aid), float(u), stage_window_days)
            if was_reported:
                pop.detected[aid] = True
                world.detected_cum[group] += 1


# -- schedule construction --------------------------------------------------------


def build_schedule(world: World, lockdown: Optional[tuple], easter_sunday: Optional[int],
                   easter_week: Optional[tuple] = None) -> None:
    """Construct the intervention timeline from the policy parameters.

    ``lockdown`` is a (start_day, end_day) window or None; ``easter_sunday``
    the day index of the holiday Sunday or None. Trip retentions go to the
    trip plan, global factors and gathering trips to the schedule.
    """
    policy = world.params.policy
    testing = world.params.testing
    schedule = world.schedule if world.schedule is not None else Schedule()
    world.schedule = schedule

    _apply_default_retentions(world, lockdown)
    if lockdown is not None:
        d0, d1 = int(lockdown[0]), int(lockdown[1])
        schedule.add_global(GlobalWindow(d0, d1,
                                         contact_reduction=policy.contact_reduction_lockdown,
                                         testing_multiplier=testing.lockdown_scale))
        schedule.add_global(GlobalWindow(d1, _BIG_DAY,
                                         contact_reduction=policy.contact_reduction_after))

    if easter_sunday is not None:
        week = easter_week if easter_week is not None else (easter_sunday - 6, easter_sunday + 2)
        schedule.add_global(GlobalWindow(int(week[0]), int(week[1]),
                                         testing_multiplier=testing.holiday_scale))
        _draw_holiday_gatherings(world, int(easter_sunday), policy.holiday_participation)

    schedule.snapshot_base(world)


def _draw_holiday_gatherings(world: World, sunday: int, participation: float) -> None:
    """One extra social-event trip on the holiday Sunday or Monday.

    Participation and day choice are drawn from a reserved system stream
    with two counters per agent, so agent streams stay untouched.
    """
    pop = world.pop
    n = len(pop)
    if n == 0 or participation <= 0:
        return
    ids = np.arange(n, dtype=np.int64)
    idx = np.full(n, _rng.STREAM_HOLIDAY, dtype=np.uint32)
    u_part = _rng.words_to_uniform01(_rng.generate_words(
        world.rng_key, idx, (2 * ids).astype(np.uint32)))
    u_day = _rng.words_to_uniform01(_rng.generate_words(
        world.rng_key, idx, (2 * ids + 1).astype(np.uint32)))
    takers = (u_part < participation) & (pop.assigned[:, LocationType.SOCIAL_EVENT] != NO_ID)
    for offset in (0, 1):
        day = sunday + offset
        sel = np.flatnonzero(takers & ((u_day < 0.5) == (offset == 0)))
        if sel.size == 0:
            continue
        targets = pop.assigned[sel, LocationType.SOCIAL_EVENT].astype(np.int64)
        homes = pop.assigned[sel, LocationType.HOME].astype(np.int64)
        agents = np.concatenate([sel, sel])
        tgt = np.concatenate([targets, homes])
        act = np.concatenate([np.full(sel.size, int(Activity.OTHER)),
                              np.full(sel.size, int(Activity.HOME))])
        minutes = np.concatenate([np.full(sel.size, 14 * 60), np.full(sel.size, 18 * 60)])
        world.schedule.special_trips[day] = (agents, tgt, act, minutes)


# -- world snapshots --------------------------------------------------------------


def save_world(world: World, path) -> None:
    """Snapshot the full world state (pickle; not an interchange format)."""
    with open(path, "wb") as fh:
        pickle.dump(world, fh, protocol=pickle.HIGHEST_PROTOCOL)


def load_world(path) -> World:
    with open(path, "rb") as fh:
        return pickle.load(fh)


def worlds_equal(a: World, b: World) -> bool:
    """Structural equality of simulation state (not parameter identity)."""
    if len(a.pop) != len(b.pop) or len(a.locs) != len(b.locs):
        return False
    if (a.clock_hours, a.rng_key, a.t0_weekday) != (b.clock_hours, b.rng_key, b.t0_weekday):
        return False
    pop_a, pop_b = a.pop, b.pop
    for name in ("age", "location", "hours_at_location", "assigned", "rng_counter",
                 "state", "mask_owned", "mask_worn", "compliance", "vaccinated",
                 "course_pos", "detected", "present_pos"):
        if not np.array_equal(getattr(pop_a, name), getattr(pop_b, name)):
            return False
    for name in ("quarantine_start", "last_negative_time", "last_negative_validity",
                 "inf_t_transmission", "inf_incline", "inf_peak", "inf_decline",
                 "inf_shed_factor", "next_transition"):
        if not np.array_equal(getattr(pop_a, name), getattr(pop_b, name), equal_nan=True):
            return False
    if pop_a.infection != pop_b.infection or pop_a.history != pop_b.history:
        return False
    locs_a, locs_b = a.locs, b.locs
    for name in ("kind", "capacity", "entry_factor", "contact_scale", "mask_required",
                 "occupancy", "n_infectious"):
        if not np.array_equal(getattr(locs_a, name), getattr(locs_b, name)):
            return False
    if locs_a.present != locs_b.present:
        return False
    return bool(np.array_equal(a.detected_cum, b.detected_cum))
