"""Age-based constrained bandit scheduling simulator."""

from .engine import backend_name
from .environment import (
    ActionSet,
    IIDChannel,
    PiecewiseChannel,
    StepOutcome,
    TraceChannel,
    apply_action,
    mean_rates,
    sample_successes,
    success_matrix,
)
from .harness import ExperimentConfig, load_trace, preset, run_experiment, run_once
from .learning import PolicyKind, TslrCounters, UcbState
from .metrics import BoundInputs, RunLog
from .oracle import OracleReport, StaticPolicy, solve_optimal_static
from .vqueue import AgeSnapshot, DeliveryQueue, hol_age_drift_oracle

__version__ = "0.1.0"

__all__ = [
    "ActionSet",
    "AgeSnapshot",
    "BoundInputs",
    "DeliveryQueue",
    "ExperimentConfig",
    "IIDChannel",
    "OracleReport",
    "PiecewiseChannel",
    "PolicyKind",
    "RunLog",
    "StaticPolicy",
    "StepOutcome",
    "TraceChannel",
    "TslrCounters",
    "UcbState",
    "apply_action",
    "backend_name",
    "hol_age_drift_oracle",
    "load_trace",
    "mean_rates",
    "preset",
    "run_experiment",
    "run_once",
    "sample_successes",
    "solve_optimal_static",
    "success_matrix",
    "__version__",
]
