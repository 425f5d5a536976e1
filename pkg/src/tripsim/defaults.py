"""Default parameter set and shipped contact matrices.

Branch probabilities, stage durations, viral-curve constants, mask, test,
quarantine and schedule values follow the fitted spring-2021 city scenario.
The base contact matrices and per-type durations of stay are configuration:
plausible age-stratified daily rates in the style of the German POLYMOD
projections, scaled to the average stay duration per venue type (rates
apply while present, so shorter stays concentrate the daily contacts).
"""

from __future__ import annotations

import numpy as np

from .core import LocationType, N_LOCATION_TYPES
from .infection import CourseParams, ViralParams
from .interventions import ProtectionFactor, QuarantinePolicy, TestType
from .transmission import ContactMatrices, TransmissionParams, split_other

AGE_P_SYMPTOMS = (0.5, 0.55, 0.6, 0.7, 0.83, 0.9)
AGE_P_SEVERE = (0.02, 0.03, 0.04, 0.07, 0.17, 0.24)
AGE_P_CRITICAL = (0.1, 0.11, 0.12, 0.14, 0.33, 0.62)
AGE_P_DEATH = (0.12, 0.13, 0.15, 0.26, 0.4, 0.48)

#: mask compliance per location type (Home..Shop fitted; medical venues 0)
MASK_COMPLIANCE = (0.0, -0.1, -0.1, -0.3, -0.2, 0.0, 0.0, 0.0)

DEFAULT_TEST = TestType("antigen", sensitivity=0.71, specificity=0.996, validity_days=1.0)

P_SYMPTOMATIC_TEST = 0.02472
RATIO_NONSYMPTOMATIC = 4.83
LOCKDOWN_TESTING_SCALE = 1.2  # "relative increase 0.2" read as a 1.2x multiplier
HOLIDAY_TESTING_SCALE = 0.66

DARK_FIGURE = 4.171
CONTACT_REDUCTION_LOCKDOWN = 0.2725
CONTACT_REDUCTION_AFTER = 0.5
HOLIDAY_PARTICIPATION = 0.2

#: trip retention (fraction executed) outside/inside the lockdown window
RETENTION_NORMAL = {"school": 0.5, "work": 0.75, "shop": 0.8, "event": 0.8}
RETENTION_LOCKDOWN = {"school": 0.0, "work": 0.7, "shop": 0.5, "event": 0.5}

SEASONALITY = {4: 0.95, 5: 0.85}

# Base daily contact rates, receivers in rows, sources in columns.
_HOME = np.array([
    [0.66, 0.38, 1.21, 0.63, 0.05, 0.01],
    [0.38, 0.98, 0.54, 1.19, 0.10, 0.01],
    [0.55, 0.31, 1.14, 0.74, 0.10, 0.02],
    [0.45, 0.70, 0.80, 1.08, 0.19, 0.02],
    [0.06, 0.11, 0.22, 0.45, 0.60, 0.07],
    [0.02, 0.03, 0.12, 0.20, 0.19, 0.33],
])
_SCHOOL = np.array([
    [1.11, 0.56, 0.25, 0.12, 0.01, 0.00],
    [0.43, 4.85, 0.57, 0.32, 0.03, 0.00],
    [0.18, 0.93, 0.88, 0.34, 0.01, 0.00],
    [0.10, 0.74, 0.39, 0.25, 0.01, 0.00],
    [0.00, 0.03, 0.03, 0.02, 0.01, 0.00],
    [0.00, 0.00, 0.00, 0.00, 0.00, 0.00],
])
_WORK = np.array([
    [0.00, 0.00, 0.00, 0.00, 0.00, 0.00],
    [0.00, 0.00, 0.00, 0.00, 0.00, 0.00],
    [0.00, 0.00, 2.37, 1.82, 0.09, 0.00],
    [0.00, 0.00, 1.52, 2.65, 0.12, 0.00],
    [0.00, 0.00, 0.24, 0.36, 0.10, 0.00],
    [0.00, 0.00, 0.00, 0.00, 0.00, 0.00],
])
_OTHER = np.array([
    [0.62, 0.36, 0.82, 0.81, 0.21, 0.05],
    [0.30, 1.60, 0.64, 0.79, 0.22, 0.05],
    [0.24, 0.39, 1.80, 1.04, 0.22, 0.06],
    [0.22, 0.47, 1.02, 1.39, 0.42, 0.09],
    [0.14, 0.22, 0.45, 0.74, 0.74, 0.17],
    [0.07, 0.11, 0.26, 0.36, 0.36, 0.35],
])

#: average hours of stay per visit, used to concentrate daily rates
STAY_HOURS = {
    LocationType.HOME: 14.0,
    LocationType.SCHOOL: 6.0,
    LocationType.WORK: 8.0,
    LocationType.SOCIAL_EVENT: 2.0,
    LocationType.BASIC_SHOP: 1.0,
    LocationType.HOSPITAL: 24.0,
    LocationType.ICU: 24.0,
}


def default_contact_matrices() -> ContactMatrices:
    event, shop = split_other(_OTHER, event_ratio=1.5)
    out = np.zeros((N_LOCATION_TYPES, 6, 6))
    base = {
        LocationType.HOME: _HOME,
        LocationType.SCHOOL: _SCHOOL,
        LocationType.WORK: _WORK,
        LocationType.SOCIAL_EVENT: event,
        LocationType.BASIC_SHOP: shop,
        LocationType.HOSPITAL: 0.1 * _OTHER,
        LocationType.ICU: 0.05 * _OTHER,
    }
    for kind, matrix in base.items():
        out[kind] = matrix * (24.0 / STAY_HOURS[kind])
    return ContactMatrices(out)


def default_course_params() -> CourseParams:
    return CourseParams(
        p_symptoms=AGE_P_SYMPTOMS,
        p_severe=AGE_P_SEVERE,
        p_critical=AGE_P_CRITICAL,
        p_death=AGE_P_DEATH,
    )


def default_transmission_params() -> TransmissionParams:
    return TransmissionParams(
        infection_coefficient=1.596,
        seasonality=dict(SEASONALITY),
        contact_reduction=1.0,
        mask_transmit=(0.0, 0.25, 0.25, 0.25),
        mask_receive=(0.0, 0.25, 0.25, 0.25),
    )


def default_viral_params() -> ViralParams:
    return ViralParams()


def default_quarantine() -> QuarantinePolicy:
    return QuarantinePolicy(length_days=10.0, efficiency=0.5)


def default_vaccination() -> ProtectionFactor:
    return ProtectionFactor(points=((0.0, 0.8),))
