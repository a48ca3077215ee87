"""Stochastic distributed operating room scheduling: models, decision-diagram recourse and decomposition solvers."""

__version__ = "0.1.0"

from .model import Instance, ScenarioSet, Schedule, ValidationError  # noqa: E402
from .sampling import GenConfig, generate_instance, sample_scenarios  # noqa: E402

__all__ = [
    "GenConfig",
    "Instance",
    "ScenarioSet",
    "Schedule",
    "ValidationError",
    "__version__",
    "generate_instance",
    "sample_scenarios",
]
