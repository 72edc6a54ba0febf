"""Scoring, statistics and information measures over trial records."""

from .info import JointDistribution, entropy, mutual_information, observability_gap
from .scoring import (
    ScoreSummary,
    abductive_success,
    action_success,
    asr_sensitivity,
    summarize,
)
from .stats import MannWhitneyResult, bootstrap_ci, mann_whitney_u

__all__ = [
    "JointDistribution",
    "MannWhitneyResult",
    "ScoreSummary",
    "abductive_success",
    "action_success",
    "asr_sensitivity",
    "bootstrap_ci",
    "entropy",
    "mann_whitney_u",
    "mutual_information",
    "observability_gap",
    "summarize",
]
