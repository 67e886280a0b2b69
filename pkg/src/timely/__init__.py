"""Deterministic wall-clock-budgeted agentic-session simulator and benchmark harness."""

from .timecore import (
    BudgetSpec,
    BudgetStatus,
    Duration,
    LatencyModel,
    SeededRng,
    StepRecord,
    TimeLedger,
    check_budget,
    effective_total,
    latency_ratio,
    ledger_append,
    predicted_rounds,
    resolve_budget,
    sample_latency,
    total_time,
    weighted_total,
)
from .reward import (
    RewardOutcome,
    RewardParams,
    compute_reward,
    game_accuracy,
    ml_accuracy_component,
    reasoning_accuracy,
    utilization,
)
from .timerlink import Jitter, TimerConfig, TimerRegistry
from .session import (
    Observation,
    ParsedTags,
    PolicyOutput,
    SessionConfig,
    SessionResult,
    parse_tags,
    run_session,
    serialize_trace,
)

__all__ = [
    "BudgetSpec",
    "BudgetStatus",
    "Duration",
    "Jitter",
    "LatencyModel",
    "Observation",
    "ParsedTags",
    "PolicyOutput",
    "RewardOutcome",
    "RewardParams",
    "SeededRng",
    "SessionConfig",
    "SessionResult",
    "StepRecord",
    "TimeLedger",
    "TimerConfig",
    "TimerRegistry",
    "check_budget",
    "compute_reward",
    "effective_total",
    "game_accuracy",
    "latency_ratio",
    "ledger_append",
    "ml_accuracy_component",
    "parse_tags",
    "predicted_rounds",
    "reasoning_accuracy",
    "resolve_budget",
    "run_session",
    "sample_latency",
    "serialize_trace",
    "total_time",
    "utilization",
    "weighted_total",
]

__version__ = "0.1.0"
