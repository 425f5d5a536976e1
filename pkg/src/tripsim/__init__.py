"""Trip-based epidemic agent simulation.

Agents with individual viral-load curves move between typed venues along
weekly trip chains; co-located agents interact through age-stratified
contact matrices. Testing, isolation, masks, venue restrictions and
vaccination protection compose into intervention scenarios. A counter-based
keyed RNG with one subsequence per agent makes every run reproducible and
schedule-independent.
"""

from .core import AgeGroup, Agent, Location, LocationType, MaskType, StepContext, World
from .infection import (CourseParams, Infection, InfectionCourse, InfectionState,
                        ViralCurve, ViralParams, draw_infection, state_at,
                        viral_load, viral_shed)
from .interventions import (QuarantinePolicy, ProtectionFactor, TestType,
                            TestingCriteria, TestingScheme, TestingStrategy)
from .mobility import Activity, ExtendedRules, Trip, TripPlan
from .scenario_io import (ParameterSet, ReportedData, SynthSpec,
                          build_synthetic_world, default_parameters,
                          load_scenario, synth_population)
from .transmission import ContactMatrices, TransmissionParams

__version__ = "0.1.0"

__all__ = [
    "AgeGroup", "Agent", "Location", "LocationType", "MaskType", "StepContext", "World",
    "CourseParams", "Infection", "InfectionCourse", "InfectionState", "ViralCurve",
    "ViralParams", "draw_infection", "state_at", "viral_load", "viral_shed",
    "QuarantinePolicy", "ProtectionFactor", "TestType", "TestingCriteria",
    "TestingScheme", "TestingStrategy", "Activity", "ExtendedRules", "Trip", "TripPlan",
    "ParameterSet", "ReportedData", "SynthSpec", "build_synthetic_world",
    "default_parameters", "load_scenario", "synth_population",
    "ContactMatrices", "TransmissionParams",
]
