"""Debt-aware self-adaptive service composition."""
from .model import (
    BurstProfile,
    ComponentService,
    CompositionPlan,
    IngestionError,
    ServiceRepository,
    SlaConstraints,
    WorkloadTrace,
    generate_synthetic_repository,
    generate_synthetic_trace,
    load_repository,
    load_workload,
    save_repository,
    save_workload,
    validate_plan,
)
from .simulator import SimConfig, compare, run

__version__ = "0.1.0"
