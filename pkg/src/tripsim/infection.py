"""Per-infection viral dynamics and the stochastic symptomatic course.

An infection has two parallel representations:

* a continuous piecewise-linear log viral-load curve (rise to a peak, then
  decline to clearance) from which the viral shed rate is derived through a
  logistic link, and
* a discrete symptomatic course, a pre-drawn walk through the state machine

      Susceptible -> Exposed -> NoSymptoms -> Mild -> Severe -> Critical
                                    |           |       |          |
                                    +-----------+---+---+----------+--> Recovered
                                                          Critical ---> Dead

  where each probabilistic branch and each stage duration is drawn once, at
  infection creation, from the owning agent's RNG stream.

Drawing eagerly (rather than per step) fixes the per-agent draw order, which
keeps parallel simulations schedule-independent.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from .rng import Stream


class InfectionState(IntEnum):
    SUSCEPTIBLE = 0
    EXPOSED = 1
    NO_SYMPTOMS = 2
    MILD = 3
    SEVERE = 4
    CRITICAL = 5
    RECOVERED = 6
    DEAD = 7


#: states in which an agent emits viral shed
INFECTIOUS_STATES = frozenset(
    {InfectionState.NO_SYMPTOMS, InfectionState.MILD, InfectionState.SEVERE, InfectionState.CRITICAL}
)
#: states counted as symptomatic by testing criteria
SYMPTOMATIC_STATES = frozenset({InfectionState.MILD, InfectionState.SEVERE, InfectionState.CRITICAL})

#: allowed transitions of the course state machine
_TRANSITIONS = {
    InfectionState.EXPOSED: (InfectionState.NO_SYMPTOMS,),
    InfectionState.NO_SYMPTOMS: (InfectionState.MILD, InfectionState.RECOVERED),
    InfectionState.MILD: (InfectionState.SEVERE, InfectionState.RECOVERED),
    InfectionState.SEVERE: (InfectionState.CRITICAL, InfectionState.RECOVERED),
    InfectionState.CRITICAL: (InfectionState.DEAD, InfectionState.RECOVERED),
}


@dataclass(frozen=True)
class ViralCurve:
    """Piecewise-linear log viral-load curve plus the personal shed factor.

    ``t_transmission`` is the time the virus was transmitted (days).
    ``incline``/``decline`` are slopes in log-units per day (decline < 0),
    ``peak`` the peak log viral load. ``alpha``/``beta`` parameterize the
    logistic load->shed link; ``shed_factor`` scales the individual's shed.
    """

    t_transmission: float
    incline: float
    peak: float
    decline: float
    shed_factor: float
    alpha: float = -7.0
    beta: float = 1.0

    def __post_init__(self):
        if self.incline <= 0 or self.peak <= 0:
            raise ValueError("incline and peak must be > 0")
        if self.decline >= 0:
            raise ValueError("decline must be < 0")
        if self.shed_factor <= 0:
            raise ValueError("shed_factor must be > 0")

    @property
    def t_peak(self) -> float:
        return self.t_transmission + self.peak / self.incline

    @property
    def t_clear(self) -> float:
        return self.t_peak - self.peak / self.decline


def viral_load(curve: ViralCurve, t):
    """Log viral load at time(s) ``t``; zero outside the curve's support.

    Negative log loads are clamped to zero.
    """
    t = np.asarray(t, dtype=np.float64)
    tp = curve.t_peak
    v = np.where(
        t <= tp,
        (t - curve.t_transmission) * curve.incline,
        curve.peak + (t - tp) * curve.decline,
    )
    inside = (t >= curve.t_transmission) & (t <= curve.t_clear)
    out = np.where(inside, np.maximum(v, 0.0), 0.0)
    return out if out.ndim else float(out)


def viral_shed(curve: ViralCurve, t):
    """Viral shed rate at time(s) ``t``: a logistic function of viral load.

    Zero outside ``[t_transmission, t_clear]``. State-dependent cutting (no
    shed while Exposed or after recovery/death) is applied by
    ``Infection.shed_at``, not here.
    """
    t = np.asarray(t, dtype=np.float64)
    v = np.asarray(viral_load(curve, t))
    s = curve.shed_factor / (1.0 + np.exp(-(curve.alpha + curve.beta * v)))
    inside = (t >= curve.t_transmission) & (t <= curve.t_clear)
    out = np.where(inside, s, 0.0)
    return out if out.ndim else float(out)


def shed_batch(t: float, t_transmission, incline, peak, decline, shed_factor, alpha: float, beta: float):
    """Vectorized shed evaluation over per-agent curve-parameter arrays.

    Equivalent to ``viral_shed`` applied elementwise; used by the engine's
    batched interaction phase.
    """
    t_transmission = np.asarray(t_transmission, dtype=np.float64)
    tp = t_transmission + peak / incline
    tc = tp - peak / decline
    v = np.where(t <= tp, (t - t_transmission) * incline, peak + (t - tp) * decline)
    v = np.maximum(v, 0.0)
    s = shed_factor / (1.0 + np.exp(-(alpha + beta * v)))
    return np.where((t >= t_transmission) & (t <= tc), s, 0.0)


@dataclass(frozen=True)
class InfectionCourse:
    """Ordered (state, entry time) walk drawn once at infection creation."""

    states: tuple
    times: tuple

    def __post_init__(self):
        if not self.states or self.states[0] != InfectionState.EXPOSED:
            raise ValueError("course must start Exposed")
        if self.states[-1] not in (InfectionState.RECOVERED, InfectionState.DEAD):
            raise ValueError("course must end Recovered or Dead")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("entry times must be strictly increasing")
        for a, b in zip(self.states, self.states[1:]):
            if b not in _TRANSITIONS.get(a, ()):
                raise ValueError(f"illegal transition {a.name} -> {b.name}")

    def state_at(self, t: float) -> InfectionState:
        if t < self.times[0]:
            raise ValueError("t precedes the course start")
        idx = int(np.searchsorted(self.times, t, side="right")) - 1
        return self.states[idx]

    @property
    def terminal(self) -> InfectionState:
        return self.states[-1]


@dataclass(frozen=True)
class Infection:
    """One infection episode: viral curve plus pre-drawn symptomatic course."""

    variant: str
    curve: ViralCurve
    course: InfectionCourse

    def state_at(self, t: float) -> InfectionState:
        return self.course.state_at(t)

    def infectious_window(self) -> tuple[float, float]:
        """Interval over which the agent actually sheds.

        Starts when the course leaves Exposed, ends at the earlier of viral
        clearance and the terminal (Recovered/Dead) entry.
        """
        start = self.course.times[1]
        end = min(self.curve.t_clear, self.course.times[-1])
        return start, max(start, end)

    def shed_at(self, t: float) -> float:
        """Shed rate with the symptomatic-state cut applied."""
        if t < self.curve.t_transmission:
            return 0.0
        if self.course.state_at(t) not in INFECTIOUS_STATES:
            return 0.0
        return float(viral_shed(self.curve, t))


@dataclass
class CourseParams:
    """Per-age-group branch probabilities and stage-duration distributions.

    Probabilities are indexed by age group (six entries). Durations are
    (mean, std) pairs in days of the LogNormal for each transition.
    """

    p_symptoms: Sequence[float]
    p_severe: Sequence[float]
    p_critical: Sequence[float]
    p_death: Sequence[float]
    t_exposed_to_nosym: tuple = (4.5, 1.5)
    t_nosym_to_mild: tuple = (1.1, 0.9)
    t_nosym_to_recovered: tuple = (8.0, 2.0)
    t_mild_to_severe: tuple = (6.6, 4.9)
    t_mild_to_recovered: tuple = (8.0, 2.0)
    t_severe_to_critical: tuple = (1.5, 2.0)
    t_severe_to_recovered: tuple = (18.1, 6.3)
    t_critical_to_dead: tuple = (10.7, 4.8)
    t_critical_to_recovered: tuple = (18.1, 6.3)

    def __post_init__(self):
        for name in ("p_symptoms", "p_severe", "p_critical", "p_death"):
            probs = np.asarray(getattr(self, name), dtype=np.float64)
            if probs.shape != (6,) or (probs < 0).any() or (probs > 1).any():
                raise ValueError(f"{name} must be six probabilities in [0, 1]")
            setattr(self, name, tuple(float(p) for p in probs))
        for name in [f.name for f in _DURATION_FIELDS]:
            mean, std = getattr(self, name)
            if mean <= 0 or std <= 0:
                raise ValueError(f"{name} mean/std must be > 0")


_DURATION_FIELDS = [f for f in dataclasses.fields(CourseParams) if f.name.startswith("t_")]


@dataclass(frozen=True)
class ViralParams:
    """Population-level viral curve parameters (per variant)."""

    peak: float = 8.1
    incline: float = 2.0
    decline: float = -0.17
    alpha: float = -7.0
    beta: float = 1.0
    shed_factor_shape: float = 1.6
    shed_factor_scale: float = 1.0 / 22.0


def draw_infection(
    stream: Stream,
    age: int,
    t_transmission: float,
    course_params: CourseParams,
    viral_params: ViralParams,
    severe_multiplier: float = 1.0,
    variant: str = "wild",
) -> Infection:
    """Draw a complete infection from the agent's stream.

    Draw order (fixed; replay depends only on the stream):

    1. shed factor ~ Gamma(shape, scale)
    2. Exposed duration (LogNormal)
    3. per subsequent non-terminal state: one branch uniform (skipped when
       the branch probability is exactly 0 or 1), then the LogNormal
       duration of the chosen transition.

    ``severe_multiplier`` scales the Mild->Severe probability (vaccination
    protection); probabilities are clamped to [0, 1].
    """
    shed_factor = stream.gamma(viral_params.shed_factor_shape, viral_params.shed_factor_scale)
    curve = ViralCurve(
        t_transmission=t_transmission,
        incline=viral_params.incline,
        peak=viral_params.peak,
        decline=viral_params.decline,
        shed_factor=shed_factor,
        alpha=viral_params.alpha,
        beta=viral_params.beta,
    )

    cp = course_params
    p_sev = min(1.0, max(0.0, cp.p_severe[age] * severe_multiplier))
    branches = {
        InfectionState.NO_SYMPTOMS: (cp.p_symptoms[age], InfectionState.MILD, cp.t_nosym_to_mild,
                                     InfectionState.RECOVERED, cp.t_nosym_to_recovered),
        InfectionState.MILD: (p_sev, InfectionState.SEVERE, cp.t_mild_to_severe,
                              InfectionState.RECOVERED, cp.t_mild_to_recovered),
        InfectionState.SEVERE: (cp.p_critical[age], InfectionState.CRITICAL, cp.t_severe_to_critical,
                                InfectionState.RECOVERED, cp.t_severe_to_recovered),
        InfectionState.CRITICAL: (cp.p_death[age], InfectionState.DEAD, cp.t_critical_to_dead,
                                  InfectionState.RECOVERED, cp.t_critical_to_recovered),
    }

    states = [InfectionState.EXPOSED]
    times = [t_transmission]
    t = t_transmission + stream.lognormal(*cp.t_exposed_to_nosym)
    states.append(InfectionState.NO_SYMPTOMS)
    times.append(t)

    current = InfectionState.NO_SYMPTOMS
    while current in branches:
        p, on_state, on_dur, off_state, off_dur = branches[current]
        if p >= 1.0:
            taken, dur = on_state, on_dur
        elif p <= 0.0:
            taken, dur = off_state, off_dur
        else:
            taken, dur = (on_state, on_dur) if stream.uniform01() < p else (off_state, off_dur)
        t = t + stream.lognormal(*dur)
        states.append(taken)
        times.append(t)
        current = taken if taken not in (InfectionState.RECOVERED, InfectionState.DEAD) else None

    course = InfectionCourse(states=tuple(states), times=tuple(times))
    return Infection(variant=variant, curve=curve, course=course)


def state_at(infection: Infection, t: float) -> InfectionState:
    """Course state whose entry time is the latest at or before ``t``."""
    return infection.state_at(t)
