"""Hand-built records for scorer tests."""

from __future__ import annotations

from metricloop.core import AgentDecision, Hypothesis, LoopConfig, MetricSnapshot, MetricSummary, TrialRecord
from metricloop.core.types import IterationRecord, paradox_class

_OUTCOME = {
    "TypeA": (True, False),
    "TypeB": (False, True),
    "AlignedSuccess": (True, True),
    "AlignedFailure": (False, False),
}


def snap(objective: float, **metrics: float) -> MetricSnapshot:
    return MetricSnapshot({k: MetricSummary.single(v) for k, v in metrics.items()}, objective, 0.0)


def decision(metric: str = "m", direction: str = "decrease", action: str = "a") -> AgentDecision:
    return AgentDecision(Hypothesis("because", metric, direction), action, "r", "{}")


def iteration(index: int, cls: str) -> IterationRecord:
    """An iteration whose snapshots genuinely produce ``cls`` at eps=0.005, maximize."""
    act, abd = _OUTCOME[cls]
    pre = snap(1.0, m=1.0)
    post = snap(1.1 if act else 0.9, m=0.5 if abd else 1.5)
    return IterationRecord(index, pre, decision(), post, post.objective_value - 1.0, act, abd,
                           paradox_class(act, abd))


def trial_from_classes(classes: list[str], domain: str = "d", seed: int = 0) -> TrialRecord:
    its = tuple(iteration(i, c) for i, c in enumerate(classes))
    cfg = LoopConfig(n_iterations=max(1, len(its)), seed=seed, objective_sense="maximize")
    return TrialRecord(domain, "test", cfg, its, snap(1.0, m=1.0))


def trial_with_rates(n: int, n_act: int, n_abd: int, n_both: int, domain: str = "d") -> TrialRecord:
    """``n`` iterations with the given success counts (``n_both`` successes on both)."""
    a_only, b_only = n_act - n_both, n_abd - n_both
    rest = n - n_both - a_only - b_only
    assert min(a_only, b_only, rest) >= 0
    classes = ["AlignedSuccess"] * n_both + ["TypeA"] * a_only + ["TypeB"] * b_only + ["AlignedFailure"] * rest
    return trial_from_classes(classes, domain)
