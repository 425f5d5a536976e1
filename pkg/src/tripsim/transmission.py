"""Location-scoped interaction: aggregated shed, exposure and infection rates.

Within one step the interaction at a location runs in two phases:

1. accumulate the average viral shed rate per source age group from all
   infectious agents present (midpoint-evaluated, reduced by the shedder's
   mask and by quarantine distancing at home), divided by the count of all
   present members of the group;
2. for every susceptible agent present, combine the cached per-group sheds
   through the location's contact matrix with seasonality and global
   contact reduction into an exposure rate, scale by the receiver's mask
   and the linear infection coefficient, and draw the transmission time
   from an exponential with that rate.

Phase 2 depends only on the frozen phase-1 cache and on each receiver's own
RNG stream, so susceptible agents can be processed in any order or in
parallel without changing the outcome.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as _rng
from .core import LocationType, MaskType, N_AGE_GROUPS, N_LOCATION_TYPES, StepContext, World
from .infection import INFECTIOUS_STATES, InfectionState, draw_infection, shed_batch


class ContactMatrices:
    """Per-location-type 6x6 daily contact rates, receiver row x source column.

    Entries are pre-scaled by the average duration of stay at the location
    type. Social-event and shop matrices are conventionally derived from a
    combined leisure matrix via ``split_other``.
    """

    def __init__(self, matrices: np.ndarray):
        matrices = np.asarray(matrices, dtype=np.float64)
        if matrices.shape != (N_LOCATION_TYPES, N_AGE_GROUPS, N_AGE_GROUPS):
            raise ValueError("expected one 6x6 matrix per location type")
        if (matrices < 0).any():
            raise ValueError("contact rates must be >= 0")
        self.matrices = matrices

    def __getitem__(self, kind: LocationType) -> np.ndarray:
        return self.matrices[int(kind)]

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        for kind in LocationType:
            np.savetxt(directory / f"{kind.name.lower()}.csv", self.matrices[kind],
                       delimiter=",", fmt="%.9g",
                       header=",".join(f"src_{i}" for i in range(N_AGE_GROUPS)), comments="")

    @classmethod
    def load(cls, directory) -> "ContactMatrices":
        directory = Path(directory)
        out = np.zeros((N_LOCATION_TYPES, N_AGE_GROUPS, N_AGE_GROUPS))
        for kind in LocationType:
            path = directory / f"{kind.name.lower()}.csv"
            if path.exists():
                out[kind] = np.loadtxt(path, delimiter=",", skiprows=1)
        return cls(out)


def split_other(other: np.ndarray, event_ratio: float = 1.5) -> tuple[np.ndarray, np.ndarray]:
    """Split a combined leisure matrix into (social event, shop) matrices.

    Social events get ``event_ratio`` times the shop contact rate; the two
    are normalized so their equally-weighted mean reproduces the original.
    """
    other = np.asarray(other, dtype=np.float64)
    scale = 2.0 / (1.0 + event_ratio)
    return event_ratio * scale * other, scale * other


@dataclass
class TransmissionParams:
    """Eq-level transmission knobs: linear coefficient, seasonality, masks.

    ``seasonality`` maps calendar month (1-12) to the monthly factor;
    ``mask_transmit``/``mask_receive`` are protections indexed by worn mask
    type (index 0 = bare face = 0 protection; additional mask types may
    extend the tuples). ``contact_reduction`` is the baseline used when no
    schedule window overrides it.
    """

    infection_coefficient: float = 1.596
    seasonality: dict = field(default_factory=dict)
    contact_reduction: float = 1.0
    mask_transmit: tuple = (0.0, 0.25, 0.25, 0.25)
    mask_receive: tuple = (0.0, 0.25, 0.25, 0.25)

    def __post_init__(self):
        if self.infection_coefficient <= 0:
            raise ValueError("infection coefficient must be > 0")
        if not 0 < self.contact_reduction <= 1:
            raise ValueError("contact reduction must be in (0, 1]")
        for arr in (self.mask_transmit, self.mask_receive):
            if any(not 0 <= m <= 1 for m in arr):
                raise ValueError("mask protections must be in [0, 1]")

    def psi(self, month: int) -> float:
        return float(self.seasonality.get(month, 1.0))


def _shedder_arrays(world: World, ids: np.ndarray, t: float, dt: float, params: TransmissionParams):
    """Midpoint shed contributions (1-q_e)(1-m_t)s(t+dt/2) for agent ids."""
    pop = world.pop
    shed = shed_batch(
        t + dt / 2.0,
        pop.inf_t_transmission[ids], pop.inf_incline[ids], pop.inf_peak[ids],
        pop.inf_decline[ids], pop.inf_shed_factor[ids],
        world.params.viral.alpha, world.params.viral.beta,
    )
    mask_t = np.asarray(params.mask_transmit)[pop.mask_worn[ids]]
    at_home = pop.location[ids] == pop.assigned[ids, LocationType.HOME]
    quarantined = ~np.isnan(pop.quarantine_start[ids])
    q_e = world.params.quarantine.efficiency
    q = np.where(quarantined & at_home, q_e, 0.0)
    return (1.0 - q) * (1.0 - mask_t) * shed


def local_shed_by_group(world: World, location_id: int, group: int, t: float, dt: float) -> float:
    """Average reduced viral shed of one source age group at a location.

    The denominator counts every present member of the group, infectious or
    not; an empty group yields 0.
    """
    params = world.params.transmission
    pop = world.pop
    present = np.asarray(world.locs.present[location_id], dtype=np.int64)
    if present.size == 0:
        return 0.0
    members = present[pop.age[present] == group]
    if members.size == 0:
        return 0.0
    infectious = members[np.isin(pop.state[members], _INFECTIOUS_CODE_ARRAY)]
    if infectious.size == 0:
        return 0.0
    contrib = _shedder_arrays(world, infectious, t, dt, params)
    return float(contrib.sum() / members.size)


def exposure_rate(shed_by_group: np.ndarray, contact_row: np.ndarray, psi: float, contact_reduction: float) -> float:
    """Exposure for a receiver group: sum_i psi * r * c(j,i) * shed_i."""
    shed_by_group = np.asarray(shed_by_group, dtype=np.float64)
    contact_row = np.asarray(contact_row, dtype=np.float64)
    return float(psi * contact_reduction * (contact_row * shed_by_group).sum())


def infection_rate(exposure: float, receiver_mask_protection: float, coefficient: float) -> float:
    """Individual infection rate: lambda * e_j * (1 - m_p)."""
    if exposure < 0:
        raise ValueError("exposure must be >= 0")
    return coefficient * exposure * (1.0 - receiver_mask_protection)


def sample_transmission(stream: _rng.Stream, rate: float, dt: float) -> bool:
    """True iff an Exponential(rate) draw lands within the step.

    A zero rate short-circuits to False without consuming a draw (the
    engine's batched path filters zero-rate receivers the same way).
    """
    if rate < 0:
        raise ValueError("rate must be >= 0")
    if dt <= 0:
        raise ValueError("dt must be > 0")
    if rate == 0.0:
        return False
    return stream.exponential(rate) <= dt


def group_shed_vector(world: World, location_id: int, t: float, dt: float) -> np.ndarray:
    """Phase-1 cache: average reduced shed per source age group (length 6)."""
    params = world.params.transmission
    pop = world.pop
    present = np.asarray(world.locs.present[location_id], dtype=np.int64)
    out = np.zeros(N_AGE_GROUPS)
    if present.size == 0:
        return out
    infectious = present[np.isin(pop.state[present], _INFECTIOUS_CODE_ARRAY)]
    if infectious.size == 0:
        return out
    infectious = np.sort(infectious)
    contrib = _shedder_arrays(world, infectious, t, dt, params)
    np.add.at(out, pop.age[infectious], contrib)
    counts = world.locs.occupancy[location_id].astype(np.float64)
    return np.divide(out, counts, out=np.zeros_like(out), where=counts > 0)


def interact(world: World, location_id: int, t: float, dt: float, ctx: StepContext) -> list[int]:
    """Execute one location's interactions; returns newly infected agent ids.

    New infections receive a transmission time ``t + x`` where ``x`` is the
    agent's exponential draw, and their full course is drawn immediately
    from their own stream. Only the infected agents' state and RNG counters
    change.
    """
    pop, locs = world.pop, world.locs
    params = world.params.transmission
    shed = group_shed_vector(world, location_id, t, dt)
    if not shed.any():
        return []
    contact = world.params.contacts[LocationType(int(locs.kind[location_id]))]
    contact = contact * locs.contact_scale[location_id]
    exposure_by_group = ctx.psi * ctx.contact_reduction * (contact @ shed)

    present = np.asarray(locs.present[location_id], dtype=np.int64)
    sus = np.sort(present[pop.state[present] == InfectionState.SUSCEPTIBLE])
    if sus.size == 0:
        return []
    e = exposure_by_group[pop.age[sus]]
    m_r = np.asarray(params.mask_receive)[pop.mask_worn[sus]]
    tau = params.infection_coefficient * e * (1.0 - m_r)
    live = sus[tau > 0]
    tau = tau[tau > 0]
    if live.size == 0:
        return []
    x = _rng.batch_exponential(world.rng_key, live, pop.rng_counter, tau)
    hit = x <= dt
    newly = live[hit]
    for aid, xi in zip(newly, x[hit]):
        infect_agent(world, int(aid), t + float(xi))
    return [int(a) for a in newly]


def infect_agent(world: World, agent_id: int, t_transmission: float, variant: str = "wild") -> None:
    """Draw and register a new infection for a susceptible agent."""
    from .interventions import severe_protection  # late import; no cycle at call time

    if world.pop.state[agent_id] != InfectionState.SUSCEPTIBLE:
        raise ValueError(f"agent {agent_id} is not susceptible")
    stream = _rng.Stream(world.rng_key, agent_id, int(world.pop.rng_counter[agent_id]))
    infection = draw_infection(
        stream, int(world.pop.age[agent_id]), t_transmission,
        world.params.course, world.params.viral,
        severe_multiplier=severe_protection(world, agent_id, t_transmission),
        variant=variant,
    )
    world.pop.rng_counter[agent_id] = stream.counter
    world.register_infection(agent_id, infection)


_INFECTIOUS_CODE_ARRAY = np.array(sorted(int(s) for s in INFECTIOUS_STATES), dtype=np.int8)
