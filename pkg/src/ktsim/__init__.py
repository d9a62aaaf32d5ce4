"""ktsim: a simulated-student environment for comparing knowledge-tracing
models (BKT, PFA, DKT) in task-selection and stopping decisions."""

from .scenario import (
    AttemptRecord,
    EpisodeLog,
    Scenario,
    Tracer,
    default_scenario,
    validate_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "AttemptRecord",
    "EpisodeLog",
    "Scenario",
    "Tracer",
    "default_scenario",
    "validate_scenario",
    "__version__",
]
