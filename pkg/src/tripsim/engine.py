"""Main simulation loop, step orchestration, loggers and the ensemble runner.

Each step runs, in order: interactions at all locations (new transmissions),
individual movement of all agents, then the infection-state clocks advance
and quarantine releases are processed. Schedule-dependent values (psi, the
contact reduction, venue restrictions, testing scaling, special-event trips)
are resolved once per simulated day, at midnight.

Determinism contract: every stochastic decision is drawn from the deciding
agent's own RNG subsequence, interaction phase two draws only from frozen
phase-one caches, and moves apply in (trip round, agent id) order. Outputs
are therefore bit-identical for any intra-run worker count. Worker chunks
compute disjoint index ranges and results merge by index, never by
completion order.
"""

from __future__ import annotations

import csv
import multiprocessing
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import rng as _rng
from .core import (HOURS_PER_DAY, LocationType, MaskType, NO_ID, N_AGE_GROUPS,
                   StepContext, World)
from .infection import INFECTIOUS_STATES, InfectionState, SYMPTOMATIC_STATES
from .interventions import GateOutcome, SymptomTarget
from .mobility import Activity, MINUTES_PER_WEEK
from .transmission import _shedder_arrays

_INFECTIOUS_CODES = np.array(sorted(int(s) for s in INFECTIOUS_STATES), dtype=np.int8)
_SYMPTOMATIC_CODES = np.array(sorted(int(s) for s in SYMPTOMATIC_STATES), dtype=np.int8)
_IMMOBILE_CODES = np.array([int(InfectionState.SEVERE), int(InfectionState.CRITICAL),
                            int(InfectionState.DEAD)], dtype=np.int8)


@dataclass
class StepConfig:
    """Step width and horizon; the clock is integer hours."""

    dt_hours: int = 1
    t0_hours: int = 0
    t_max_hours: int = 0

    def __post_init__(self):
        if self.dt_hours <= 0:
            raise ValueError("dt must be > 0")
        if self.t0_hours > self.t_max_hours:
            raise ValueError("t0 must not exceed t_max")


@dataclass
class EnsembleConfig:
    runs: int = 1
    master_seed: int = 0
    seeds: Optional[list] = None
    workers: int = 1

    def run_seeds(self) -> list[int]:
        if self.seeds is not None:
            if len(self.seeds) != self.runs:
                raise ValueError("explicit seed list must match run count")
            return [int(s) for s in self.seeds]
        return [_rng.derive_run_key(self.master_seed, r) for r in range(self.runs)]


@dataclass
class StepEvents:
    new_infections: int = 0
    detected_new: np.ndarray = field(default_factory=lambda: np.zeros(N_AGE_GROUPS, dtype=np.int64))
    deaths_new: int = 0


def _chunks(n: int, workers: int) -> list[tuple[int, int]]:
    workers = max(1, min(workers, n)) if n else 1
    bounds = np.linspace(0, n, workers + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _map_chunks(fn: Callable, n: int, workers: int) -> None:
    """Run fn(start, stop) over contiguous chunks; merge is by index.

    Chunk results must be written into disjoint output slices by ``fn``
    itself, which makes the outcome independent of scheduling.
    """
    spans = _chunks(n, workers)
    if len(spans) <= 1 or workers <= 1:
        for a, b in spans:
            fn(a, b)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        list(pool.map(lambda s: fn(*s), spans))


# -- interaction phase ---------------------------------------------------------


def _interaction_phase(world: World, t: float, dt: float, ctx: StepContext,
                       workers: int) -> list[int]:
    """Batched equivalent of running transmission.interact at every location."""
    from .transmission import infect_agent

    pop, locs = world.pop, world.locs
    params = world.params.transmission

    inf_ids = np.flatnonzero(np.isin(pop.state, _INFECTIOUS_CODES))
    if inf_ids.size == 0:
        return []
    contrib = _shedder_arrays(world, inf_ids, t, dt, params)
    loc_of = pop.location[inf_ids]
    hot = np.unique(loc_of)
    locmap = np.full(len(locs), -1, dtype=np.int64)
    locmap[hot] = np.arange(hot.size)

    shed_sum = np.zeros((hot.size, N_AGE_GROUPS))
    np.add.at(shed_sum, (locmap[loc_of], pop.age[inf_ids]), contrib)
    counts = locs.occupancy[hot].astype(np.float64)
    shed_avg = np.divide(shed_sum, counts, out=np.zeros_like(shed_sum), where=counts > 0)

    # exposure per (hot location, receiver group); elementwise accumulation
    # keeps float summation order fixed regardless of worker count
    exposure = np.zeros_like(shed_avg)
    kinds = locs.kind[hot]
    for kind in np.unique(kinds):
        rows = np.flatnonzero(kinds == kind)
        matrix = world.params.contacts.matrices[int(kind)]
        block = np.zeros((rows.size, N_AGE_GROUPS))
        for i in range(N_AGE_GROUPS):
            block += shed_avg[rows, i][:, None] * matrix[None, :, i]
        exposure[rows] = block
    exposure *= ctx.psi * ctx.contact_reduction * locs.contact_scale[hot][:, None]

    sus = np.flatnonzero(pop.state == InfectionState.SUSCEPTIBLE)
    rows = locmap[pop.location[sus]]
    sus = sus[rows >= 0]
    rows = rows[rows >= 0]
    if sus.size == 0:
        return []
    e = exposure[rows, pop.age[sus]]
    m_r = np.asarray(params.mask_receive)[pop.mask_worn[sus]]
    tau = params.infection_coefficient * e * (1.0 - m_r)
    live = sus[tau > 0]
    tau = tau[tau > 0]
    if live.size == 0:
        return []

    x = np.empty(live.size, dtype=np.float64)

    def draw(a: int, b: int) -> None:
        x[a:b] = _rng.batch_exponential(world.rng_key, live[a:b], pop.rng_counter, tau[a:b])

    _map_chunks(draw, live.size, workers)
    hit = x <= dt
    newly = live[hit]
    for aid, xi in zip(newly, x[hit]):
        infect_agent(world, int(aid), t + float(xi))
    return [int(a) for a in newly]


# -- movement phase ------------------------------------------------------------


def _core_moves(world: World, t: float) -> np.ndarray:
    """Apply infection-state and quarantine forced moves; returns moved ids."""
    pop, locs = world.pop, world.locs
    state = pop.state
    loc = pop.location
    assigned = pop.assigned
    targets = np.full(len(pop), NO_ID, dtype=np.int64)

    for code, slot in ((InfectionState.SEVERE, LocationType.HOSPITAL),
                       (InfectionState.CRITICAL, LocationType.ICU),
                       (InfectionState.DEAD, LocationType.CEMETERY)):
        ids = np.flatnonzero((state == code) & (loc != assigned[:, slot]))
        targets[ids] = assigned[ids, slot]

    kind_at = locs.kind[loc]
    at_medical = (kind_at == LocationType.HOSPITAL) | (kind_at == LocationType.ICU)
    rec = np.flatnonzero((state == InfectionState.RECOVERED) & at_medical)
    targets[rec] = assigned[rec, LocationType.HOME]

    at_home_ish = at_medical | (kind_at == LocationType.HOME)
    quar = np.flatnonzero(~np.isnan(pop.quarantine_start) & ~at_home_ish
                          & (targets == NO_ID)
                          & ~np.isin(state, _IMMOBILE_CODES))
    targets[quar] = assigned[quar, LocationType.HOME]

    movers = np.flatnonzero(targets != NO_ID)
    for aid in movers:
        world.move_agent(int(aid), int(targets[aid]))
        pop.mask_worn[aid] = np.int8(MaskType.NONE)
    return movers


def _gather_candidates(world: World, ctx: StepContext, dt_hours: int):
    """Candidate trips for this step as (agent, target, activity, minute, round)."""
    pop = world.pop
    plan = world.trips
    minute_of_week = world.minute_of_week
    dt_minutes = dt_hours * 60
    minute_of_day0 = (world.clock_hours % HOURS_PER_DAY) * 60

    agents, targets, activities, minutes = [], [], [], []
    if plan is not None and len(plan):
        idx = plan.indices_in_window(minute_of_week, dt_minutes)
        if idx.size:
            agents.append(plan.agent[idx])
            targets.append(plan.target[idx].astype(np.int64))
            activities.append(plan.activity[idx].astype(np.int64))
            minutes.append(plan.start_minute[idx].astype(np.int64))

    rules = world.extended_rules
    if rules is not None:
        covered = plan.covered if plan is not None else np.zeros(len(pop), dtype=bool)
        if not covered.all():
            for h in range(dt_hours):
                hours = world.clock_hours + h
                weekday = (world.t0_weekday + hours // HOURS_PER_DAY) % 7
                hour = hours % HOURS_PER_DAY
                for age in range(N_AGE_GROUPS):
                    hit = rules.destination(age, weekday, hour)
                    if hit is None:
                        continue
                    slot, activity = hit
                    ids = np.flatnonzero((pop.age == age) & ~covered)
                    tgt = pop.assigned[ids, slot].astype(np.int64)
                    ok = tgt != NO_ID
                    ids, tgt = ids[ok], tgt[ok]
                    if ids.size:
                        agents.append(ids.astype(np.int64))
                        targets.append(tgt)
                        activities.append(np.full(ids.size, int(activity), dtype=np.int64))
                        minutes.append(np.full(ids.size, hour * 60, dtype=np.int64))

    if ctx.extra_trips is not None:
        ids, tgt, act, mins = ctx.extra_trips
        sel = (mins >= minute_of_day0) & (mins < minute_of_day0 + dt_minutes)
        if sel.any():
            agents.append(np.asarray(ids)[sel].astype(np.int64))
            targets.append(np.asarray(tgt)[sel].astype(np.int64))
            activities.append(np.asarray(act)[sel].astype(np.int64))
            minutes.append(np.asarray(mins)[sel].astype(np.int64))

    if not agents:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, empty, empty, empty
    agent = np.concatenate(agents)
    target = np.concatenate(targets)
    activity = np.concatenate(activities)
    minute = np.concatenate(minutes)

    order = np.argsort(minute, kind="stable")
    agent, target, activity, minute = agent[order], target[order], activity[order], minute[order]

    by_agent = np.argsort(agent, kind="stable")
    sorted_agents = agent[by_agent]
    if sorted_agents.size:
        new_run = np.concatenate([[True], sorted_agents[1:] != sorted_agents[:-1]])
        run_ids = np.cumsum(new_run) - 1
        run_starts = np.flatnonzero(new_run)
        occurrence_sorted = np.arange(sorted_agents.size) - run_starts[run_ids]
        rounds = np.empty_like(occurrence_sorted)
        rounds[by_agent] = occurrence_sorted
    else:
        rounds = np.empty(0, dtype=np.int64)
    return agent, target, activity, minute, rounds


def _batch_test(world: World, ids: np.ndarray, u: np.ndarray, sensitivity: float,
                specificity: float, validity_days: float, t: float) -> np.ndarray:
    """Vectorized perform_test over pre-drawn uniforms; returns positive mask."""
    pop = world.pop
    infected = np.isin(pop.state[ids], _INFECTIOUS_CODES)
    positive = np.where(infected, u < sensitivity, u < 1.0 - specificity)
    pos_ids = ids[positive]
    pop.quarantine_start[pos_ids] = t
    fresh = positive & infected & ~pop.detected[ids]
    fresh_ids = ids[fresh]
    pop.detected[fresh_ids] = True
    np.add.at(world.detected_cum, pop.age[fresh_ids], 1)
    neg_ids = ids[~positive]
    pop.last_negative_time[neg_ids] = t
    pop.last_negative_validity[neg_ids] = validity_days
    return positive


def _chunked_uniform(world: World, ids: np.ndarray, workers: int) -> np.ndarray:
    u = np.empty(ids.size, dtype=np.float64)

    def draw(a: int, b: int) -> None:
        u[a:b] = _rng.batch_uniform(world.rng_key, ids[a:b], world.pop.rng_counter)

    _map_chunks(draw, ids.size, workers)
    return u


def _movement_phase(world: World, t: float, dt: float, ctx: StepContext,
                    dt_hours: int, workers: int) -> None:
    """Batched movement with the documented per-trip wave order."""
    pop, locs = world.pop, world.locs
    core_moved = np.zeros(len(pop), dtype=bool)
    core_moved[_core_moves(world, t)] = True

    agent, target, activity, minute, rounds = _gather_candidates(world, ctx, dt_hours)
    if agent.size == 0:
        return
    strategy = world.testing

    for r in range(int(rounds.max()) + 1 if rounds.size else 0):
        sel = rounds == r
        a = agent[sel]
        tgt = target[sel]
        act = activity[sel]

        # eligibility at wave time: mobile, not quarantined, not already
        # forced by a core rule this step, actually moving
        eligible = (~np.isin(pop.state[a], _IMMOBILE_CODES)
                    & np.isnan(pop.quarantine_start[a])
                    & ~core_moved[a]
                    & (pop.location[a] != tgt)
                    & (locs.entry_factor[tgt] > 0.0))
        a, tgt, act = a[eligible], tgt[eligible], act[eligible]
        if a.size == 0:
            continue

        # wave 1: activity retention (resolved per activity, then gathered)
        if world.trips is not None:
            by_activity = np.array([world.trips.retention(c, ctx.day)
                                    for c in range(len(Activity))])
            retain = by_activity[act]
        else:
            retain = np.ones(a.size)
        keep = retain > 0.0
        need = keep & (retain < 1.0)
        if need.any():
            ids = a[need]
            u = _chunked_uniform(world, ids, workers)
            keep[need] &= u < retain[need]
        a, tgt, act = a[keep], tgt[keep], act[keep]
        if a.size == 0:
            continue

        go_home = np.zeros(a.size, dtype=bool)
        denied = np.zeros(a.size, dtype=bool)

        if strategy is not None:
            # wave 2: voluntary test decision
            symptomatic = np.isin(pop.state[a], _SYMPTOMATIC_CODES)
            p_vol = np.where(symptomatic,
                             strategy.voluntary_probability(True, ctx.testing_multiplier),
                             strategy.voluntary_probability(False, ctx.testing_multiplier))
            decide = p_vol > 0.0
            testers = np.zeros(a.size, dtype=bool)
            if decide.any():
                u = _chunked_uniform(world, a[decide], workers)
                testers[decide] = u < p_vol[decide]
            # wave 3: voluntary test result
            if testers.any():
                vt = strategy.voluntary_test
                u = _chunked_uniform(world, a[testers], workers)
                positive = _batch_test(world, a[testers], u, vt.sensitivity,
                                       vt.specificity, vt.validity_days, t)
                go_home[np.flatnonzero(testers)[positive]] = True

            # wave 4: schemes in strategy order
            for scheme in strategy.schemes:
                open_mask = ~go_home & ~denied
                if not open_mask.any():
                    break
                applicable = np.zeros(a.size, dtype=bool)
                for i in np.flatnonzero(open_mask):
                    applicable[i] = scheme.criteria.matches(world, int(a[i]), int(tgt[i]), t)
                if not applicable.any():
                    continue
                valid_neg = (~np.isnan(pop.last_negative_time[a])
                             & (t - pop.last_negative_time[a] <= pop.last_negative_validity[a]))
                applicable &= ~valid_neg
                if scheme.probability <= 0.0 or not applicable.any():
                    continue
                tested = applicable.copy()
                if scheme.probability < 1.0:
                    u = _chunked_uniform(world, a[applicable], workers)
                    tested[applicable] = u < scheme.probability
                if tested.any():
                    u = _chunked_uniform(world, a[tested], workers)
                    positive = _batch_test(world, a[tested], u, scheme.test.sensitivity,
                                           scheme.test.specificity, scheme.test.validity_days, t)
                    go_home[np.flatnonzero(tested)[positive]] = True

        # wave 5: mask decision
        worn = np.zeros(a.size, dtype=np.int8)
        open_mask = ~go_home & ~denied
        required = locs.mask_required[tgt]
        kind_tgt = locs.kind[tgt].astype(np.int64)
        compliance = pop.compliance[a, kind_tgt]
        mandate = open_mask & (required >= 0)
        refuse_draw = mandate & (compliance < 0.0)
        if refuse_draw.any():
            u = _chunked_uniform(world, a[refuse_draw], workers)
            refused = u < -compliance[refuse_draw]
            denied[np.flatnonzero(refuse_draw)[refused]] = True
        comply = mandate & ~denied
        worn[comply] = np.maximum(required[comply], pop.mask_owned[a[comply]])
        voluntary = open_mask & (required < 0) & (compliance > 0.0)
        if voluntary.any():
            u = _chunked_uniform(world, a[voluntary], workers)
            wears = u < compliance[voluntary]
            vids = np.flatnonzero(voluntary)[wears]
            worn[vids] = pop.mask_owned[a[vids]]

        # wave 6: entry reduction
        open_mask = ~go_home & ~denied
        factor = locs.entry_factor[tgt]
        need = open_mask & (factor < 1.0)
        if need.any():
            u = _chunked_uniform(world, a[need], workers)
            denied[np.flatnonzero(need)[u >= factor[need]]] = True

        # apply in agent-id order: quarantine moves, then gated moves
        open_mask = ~go_home & ~denied
        for i in np.argsort(a, kind="stable"):
            aid = int(a[i])
            if go_home[i]:
                world.move_agent(aid, int(pop.assigned[aid, LocationType.HOME]))
                pop.mask_worn[aid] = np.int8(MaskType.NONE)
            elif open_mask[i]:
                t_id = int(tgt[i])
                capacity = int(locs.capacity[t_id])
                if capacity != NO_ID and len(locs.present[t_id]) + 1 > capacity:
                    continue
                world.move_agent(aid, t_id)
                pop.mask_worn[aid] = np.int8(worn[i])


# -- state advance -------------------------------------------------------------


def _advance_states(world: World, t_end: float) -> StepEvents:
    pop, locs = world.pop, world.locs
    events = StepEvents()
    due = np.flatnonzero(pop.next_transition <= t_end)
    for aid in due:
        infection = pop.infection[aid]
        course = infection.course
        pos = int(pop.course_pos[aid])
        while pos + 1 < len(course.times) and course.times[pos + 1] <= t_end:
            pos += 1
            old = InfectionState(int(pop.state[aid]))
            new = course.states[pos]
            pop.state[aid] = np.int8(new)
            loc = int(pop.location[aid])
            if old not in INFECTIOUS_STATES and new in INFECTIOUS_STATES:
                locs.n_infectious[loc] += 1
            elif old in INFECTIOUS_STATES and new not in INFECTIOUS_STATES:
                locs.n_infectious[loc] -= 1
            if new is InfectionState.DEAD:
                events.deaths_new += 1
        pop.course_pos[aid] = np.int16(pos)
        pop.next_transition[aid] = (course.times[pos + 1]
                                    if pos + 1 < len(course.times) else np.inf)

    quarantined = np.flatnonzero(~np.isnan(pop.quarantine_start))
    if quarantined.size:
        done = t_end >= pop.quarantine_start[quarantined] + world.params.quarantine.length_days
        pop.quarantine_start[quarantined[done]] = np.nan
    return events


# -- day resolution ------------------------------------------------------------


def resolve_day(world: World, day: int) -> StepContext:
    """Build the step context for a day and materialize venue restrictions."""
    params = world.params
    if world.t0_date is not None:
        import datetime

        month = (world.t0_date + datetime.timedelta(days=day)).month
        psi = params.transmission.psi(month)
    else:
        psi = 1.0
    r = params.transmission.contact_reduction
    mult = 1.0
    extra = None
    if world.schedule is not None:
        world.schedule.materialize_day(world, day)
        psi, r, mult = world.schedule.resolve_globals(day, psi, r)
        extra = world.schedule.special_trips.get(day)
    return StepContext(day=day, psi=psi, contact_reduction=r,
                       testing_multiplier=mult, extra_trips=extra)


# -- loggers -------------------------------------------------------------------


class Logger:
    """Pull-based sampler over world state; accumulates CSV-ready rows."""

    columns: tuple = ("time", "value")

    def __init__(self, name: str):
        self.name = name
        self.rows: list[tuple] = []

    def sample(self, world: World, events: StepEvents) -> None:
        raise NotImplementedError


class StateCountLogger(Logger):
    columns = ("time", "value", "state")

    def __init__(self):
        super().__init__("state_counts")

    def sample(self, world, events):
        counts = world.state_counts()
        for s in InfectionState:
            self.rows.append((world.clock_hours, int(counts[s]), s.name))


class ScalarLogger(Logger):
    def __init__(self, name: str, fn: Callable[[World, StepEvents], float]):
        super().__init__(name)
        self.fn = fn

    def sample(self, world, events):
        self.rows.append((world.clock_hours, self.fn(world, events)))


class DetectedCumLogger(Logger):
    columns = ("time", "value", "age_group")

    def __init__(self):
        super().__init__("detected_cum")

    def sample(self, world, events):
        for g in range(N_AGE_GROUPS):
            self.rows.append((world.clock_hours, int(world.detected_cum[g]), g))


def default_loggers() -> list[Logger]:
    return [
        StateCountLogger(),
        ScalarLogger("infections_hourly", lambda w, e: e.new_infections),
        ScalarLogger("icu_occupancy",
                     lambda w, e: int((w.pop.state == InfectionState.CRITICAL).sum())),
        ScalarLogger("hospitalized",
                     lambda w, e: int(np.isin(w.pop.state, [int(InfectionState.SEVERE),
                                                            int(InfectionState.CRITICAL)]).sum())),
        ScalarLogger("deaths_cum", lambda w, e: int((w.pop.state == InfectionState.DEAD).sum())),
        ScalarLogger("detected_new", lambda w, e: int(e.detected_new.sum())),
        DetectedCumLogger(),
    ]


@dataclass
class RunResult:
    """Time series per logger plus the final world."""

    seed: int
    series: dict
    columns: dict
    world: Optional[World] = None

    def as_arrays(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """(time_hours, value) arrays for a scalar logger."""
        rows = self.series[name]
        t = np.array([r[0] for r in rows], dtype=np.int64)
        v = np.array([r[1] for r in rows], dtype=np.float64)
        return t, v

    def total_by_time(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        """Sum a keyed logger (state/age column) over its key per time point."""
        rows = self.series[name]
        t = np.array([r[0] for r in rows], dtype=np.int64)
        v = np.array([r[1] for r in rows], dtype=np.float64)
        times = np.unique(t)
        totals = np.zeros(len(times))
        np.add.at(totals, np.searchsorted(times, t), v)
        return times, totals

    def daily(self, name: str, reduce: str = "last") -> np.ndarray:
        """Aggregate a logger to daily values (last or sum per day)."""
        if len(self.columns[name]) > 2:
            t, v = self.total_by_time(name)
        else:
            t, v = self.as_arrays(name)
        days = t // HOURS_PER_DAY
        n_days = int(days.max()) + 1 if len(days) else 0
        out = np.zeros(n_days)
        if reduce == "last":
            for d in range(n_days):
                sel = days == d
                if sel.any():
                    out[d] = v[np.flatnonzero(sel)[-1]]
        elif reduce == "sum":
            np.add.at(out, days, v)
        else:
            raise ValueError("reduce must be 'last' or 'sum'")
        return out


# -- the loop itself -----------------------------------------------------------


def step(world: World, ctx: StepContext, dt_hours: int = 1, workers: int = 1) -> StepEvents:
    """Advance the world by one step: interact, move, then advance clocks."""
    t = world.t_days
    dt = dt_hours / HOURS_PER_DAY
    detected_before = world.detected_cum.copy()
    newly = _interaction_phase(world, t, dt, ctx, workers)
    _movement_phase(world, t, dt, ctx, dt_hours, workers)
    events = _advance_states(world, t + dt)
    world.pop.hours_at_location += np.int32(dt_hours)
    world.clock_hours += dt_hours
    events.new_infections = len(newly)
    events.detected_new = world.detected_cum - detected_before
    return events


def simulate(world: World, days: Optional[float] = None, steps: Optional[int] = None,
             dt_hours: int = 1, workers: int = 1, loggers: Optional[list] = None,
             out_dir=None, check_consistency: bool = False) -> RunResult:
    """Run the main loop over the horizon; sample loggers each step.

    Loggers also sample the initial state. ``workers`` controls intra-run
    chunking only; outputs are bit-identical for any value.
    """
    if (days is None) == (steps is None):
        raise ValueError("specify exactly one of days/steps")
    n_steps = int(steps if steps is not None else round(days * HOURS_PER_DAY / dt_hours))
    if loggers is None:
        loggers = default_loggers()

    zero = StepEvents()
    for logger in loggers:
        logger.sample(world, zero)
    ctx = resolve_day(world, world.day)
    current_day = world.day
    for _ in range(n_steps):
        if world.day != current_day:
            ctx = resolve_day(world, world.day)
            current_day = world.day
        events = step(world, ctx, dt_hours, workers)
        for logger in loggers:
            logger.sample(world, events)
        if check_consistency:
            world.check_consistency()

    result = RunResult(seed=world.rng_key,
                       series={lg.name: lg.rows for lg in loggers},
                       columns={lg.name: lg.columns for lg in loggers},
                       world=world)
    if out_dir is not None:
        write_run_csvs(result, out_dir)
    return result


def write_run_csvs(result: RunResult, out_dir) -> None:
    """One CSV per logger; the run seed rides along as a comment line."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, rows in result.series.items():
        with open(out_dir / f"{name}.csv", "w", newline="") as fh:
            fh.write(f"# seed={result.seed}\n")
            writer = csv.writer(fh)
            writer.writerow(result.columns[name])
            for row in rows:
                writer.writerow([_fmt(x) for x in row])


def _fmt(x):
    if isinstance(x, float):
        return format(x, ".10g")
    return x


def read_run_csvs(run_dir) -> RunResult:
    """Rebuild a RunResult from a run directory's logger CSVs."""
    run_dir = Path(run_dir)
    series: dict = {}
    columns: dict = {}
    seed = 0
    for path in sorted(run_dir.glob("*.csv")):
        with open(path, newline="") as fh:
            header_comment = fh.readline()
            if header_comment.startswith("# seed="):
                seed = int(header_comment.strip().split("=", 1)[1])
                header = fh.readline()
            else:
                header = header_comment
            cols = tuple(header.strip().split(","))
            rows = []
            for line in csv.reader(fh):
                parsed = [int(line[0]), float(line[1])]
                parsed.extend(line[2:])
                rows.append(tuple(parsed))
        series[path.stem] = rows
        columns[path.stem] = cols
    return RunResult(seed=seed, series=series, columns=columns, world=None)


# -- ensembles -----------------------------------------------------------------


def _run_one(args):
    runner, idx, seed = args
    try:
        return idx, runner(idx, seed), None
    except Exception:
        return idx, None, traceback.format_exc()


def run_ensemble(runner: Callable[[int, int], RunResult], config: EnsembleConfig,
                 out_dir=None) -> tuple[list, dict]:
    """Run independent simulations and summarize percentile bands.

    ``runner(run_index, seed)`` must be picklable for worker counts > 1.
    Results are gathered in seed order regardless of completion order; a
    failed run is reported in the summary's ``errors`` without aborting
    siblings.
    """
    seeds = config.run_seeds()
    jobs = [(runner, i, s) for i, s in enumerate(seeds)]
    results: list = [None] * len(jobs)
    errors: dict = {}
    if config.workers > 1 and len(jobs) > 1:
        with multiprocessing.get_context("fork").Pool(config.workers) as pool:
            for idx, res, err in pool.imap_unordered(_run_one, jobs):
                results[idx] = res
                if err is not None:
                    errors[idx] = err
    else:
        for job in jobs:
            idx, res, err = _run_one(job)
            results[idx] = res
            if err is not None:
                errors[idx] = err

    ok = [r for r in results if r is not None]
    summary = {"errors": errors, "seeds": seeds, "percentiles": {}}
    if ok:
        summary["percentiles"] = summarize_runs(ok)
    if out_dir is not None:
        out_dir = Path(out_dir)
        for i, res in enumerate(results):
            if res is not None:
                write_run_csvs(res, out_dir / f"run_{i:03d}")
        write_summary_csvs(summary, out_dir)
    return results, summary


PERCENTILES = (5, 25, 50, 75, 95)


def summarize_runs(results: list) -> dict:
    """Per-logger p5/p25/p50/p75/p95 bands over the ensemble.

    Loggers with an extra key column (state, age group) are aggregated by
    summing over the key first.
    """
    out = {}
    first = results[0]
    for name, rows in first.series.items():
        if len(first.columns[name]) == 2:
            stack = np.stack([r.as_arrays(name)[1] for r in results])
            t = first.as_arrays(name)[0]
        else:
            def total(res):
                arr = np.array([[row[0], row[1]] for row in res.series[name]], dtype=np.float64)
                times = np.unique(arr[:, 0])
                sums = np.zeros(len(times))
                np.add.at(sums, np.searchsorted(times, arr[:, 0]), arr[:, 1])
                return times.astype(np.int64), sums

            t, _ = total(first)
            stack = np.stack([total(r)[1] for r in results])
        bands = {f"p{p}": np.percentile(stack, p, axis=0) for p in PERCENTILES}
        out[name] = {"time": t, **bands}
    return out


def write_summary_csvs(summary: dict, out_dir) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, bands in summary["percentiles"].items():
        with open(out_dir / f"{name}_summary.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time"] + [f"p{p}" for p in PERCENTILES])
            for i, t in enumerate(bands["time"]):
                writer.writerow([int(t)] + [format(float(bands[f"p{p}"][i]), ".10g")
                                            for p in PERCENTILES])
