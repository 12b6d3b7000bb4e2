"""crossflux: a desk-scale co-simulator of a connected-vehicle signalized
intersection, quantifying how V2I message loss degrades adaptive control and
how extrapolation-based correction recovers it."""

from .engine import RunConfig, RunOutputs, run
from .scenario import (Condition, Scenario, default_case_study, load_scenario,
                       study_conditions, validate)

__version__ = "0.1.0"

__all__ = [
    "Condition", "RunConfig", "RunOutputs", "Scenario",
    "default_case_study", "load_scenario", "study_conditions",
    "run", "validate", "__version__",
]
