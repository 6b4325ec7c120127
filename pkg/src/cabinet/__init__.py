"""Dynamically weighted consensus with a deterministic simulation harness."""

from .consensus import (
    Algo,
    ClusterConfig,
    Node,
    Role,
    RoundStatus,
    weighted_read,
)
from .harness import (
    MetricsRow,
    Scenario,
    compare_paired,
    metrics_rows,
    run_experiment,
    run_scenario,
    summarize,
)
from .simnet import (
    CrashPlan,
    DelayModel,
    HeterogeneityProfile,
    LivelockError,
    Simulation,
    sample_delay,
    suggest_election_timeouts,
)
from .trace import ExecutionTrace
from .verify import (
    audit_trace,
    commit_time_oracle,
    exhaustive_scheme_check,
    expected_commit_times,
    triage_scheme,
)
from .weights import (
    SchemeVerdict,
    Violation,
    WeightScheme,
    generate_scheme,
    scheme_from_json,
    scheme_to_json,
    validate_scheme,
)
from .workload import BUILTIN_MIXES, Batch, OperationMix, generate_batch

__all__ = [
    "Algo",
    "BUILTIN_MIXES",
    "Batch",
    "ClusterConfig",
    "CrashPlan",
    "DelayModel",
    "ExecutionTrace",
    "HeterogeneityProfile",
    "LivelockError",
    "MetricsRow",
    "Node",
    "OperationMix",
    "Role",
    "RoundStatus",
    "Scenario",
    "SchemeVerdict",
    "Simulation",
    "Violation",
    "WeightScheme",
    "audit_trace",
    "commit_time_oracle",
    "compare_paired",
    "exhaustive_scheme_check",
    "expected_commit_times",
    "generate_batch",
    "generate_scheme",
    "metrics_rows",
    "run_experiment",
    "run_scenario",
    "sample_delay",
    "scheme_from_json",
    "scheme_to_json",
    "suggest_election_timeouts",
    "summarize",
    "triage_scheme",
    "validate_scheme",
    "weighted_read",
]

__version__ = "0.1.0"
