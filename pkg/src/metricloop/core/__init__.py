"""Protocol types, the loop runner and trial-record serialization."""

from .loop import build_context, run_trial, score_step
from .records import (
    atomic_write,
    deserialize_trial,
    deserialize_trials,
    read_trial,
    read_trials,
    serialize_trial,
    write_trial,
)
from .types import (
    ActionSpec,
    AgentDecision,
    ContextWindow,
    Hypothesis,
    IterationRecord,
    LoopConfig,
    MetricSnapshot,
    MetricSummary,
    TrialRecord,
    paradox_class,
)

__all__ = [
    "ActionSpec",
    "AgentDecision",
    "ContextWindow",
    "Hypothesis",
    "IterationRecord",
    "LoopConfig",
    "MetricSnapshot",
    "MetricSummary",
    "TrialRecord",
    "atomic_write",
    "build_context",
    "deserialize_trial",
    "deserialize_trials",
    "paradox_class",
    "read_trial",
    "read_trials",
    "run_trial",
    "score_step",
    "serialize_trial",
    "write_trial",
]
