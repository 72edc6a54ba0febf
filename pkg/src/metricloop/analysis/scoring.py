"""Per-iteration success predicates and pooled trial scores."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from ..core.types import (
    ALIGNED_FAILURE,
    ALIGNED_SUCCESS,
    PARADOX_CLASSES,
    TYPE_A,
    TYPE_B,
    Hypothesis,
    IterationRecord,
    MetricSnapshot,
    TrialRecord,
    paradox_class,
)
from ..errors import EmptyInput, MissingMetric

MISSING_METRIC_FLAG = "missing_metric"


def _moved(before: float, after: float, direction: str, eps: float) -> bool:
    # Relative threshold; a zero reference falls back to an absolute threshold of eps.
    threshold = eps * abs(before) if before != 0 else eps
    change = after - before
    if direction in ("increase", "maximize"):
        return change > threshold
    return -change > threshold


def action_success(pre: MetricSnapshot, post: MetricSnapshot, sense: str, eps: float) -> bool:
    """True iff the objective improved on ``pre`` by more than ``eps * |pre|`` in ``sense``."""
    return _moved(pre.objective_value, post.objective_value, sense, eps)


def abductive_success(hypothesis: Hypothesis, pre: MetricSnapshot, post: MetricSnapshot, eps: float) -> bool:
    """True iff the hypothesised metric's median moved the predicted way beyond the threshold."""
    name = hypothesis.target_metric
    if name not in pre.metrics or name not in post.metrics:
        raise MissingMetric(f"metric {name!r} absent from snapshot")
    return _moved(pre.median(name), post.median(name), hypothesis.predicted_direction, eps)


def score_abduction(hypothesis: Hypothesis, pre: MetricSnapshot, post: MetricSnapshot,
                    eps: float) -> tuple[bool, tuple[str, ...]]:
    """Like :func:`abductive_success` but scores a missing metric as a flagged failure."""
    try:
        return abductive_success(hypothesis, pre, post, eps), ()
    except MissingMetric:
        return False, (MISSING_METRIC_FLAG,)


@dataclass(frozen=True)
class ScoreSummary:
    actsr: float
    asr: float
    gap_pp: float
    class_counts: Mapping[str, int]
    n_iterations: int
    n_trials: int = 0
    # per-trial averages, reported next to the pooled headline numbers
    actsr_macro: float = 0.0
    asr_macro: float = 0.0
    gap_pp_macro: float = 0.0
    excluded: int = 0


def _counts(iterations: Iterable[IterationRecord]) -> Counter:
    counts = Counter({c: 0 for c in PARADOX_CLASSES})
    for it in iterations:
        counts[it.paradox_class] += 1
    return counts


def trial_rates(trial: TrialRecord) -> tuple[float, float, float] | None:
    """(actsr, asr, gap_pp) for one trial, or None for an empty trial."""
    n = len(trial.iterations)
    if n == 0:
        return None
    c = _counts(trial.iterations)
    n_act = c[TYPE_A] + c[ALIGNED_SUCCESS]
    n_abd = c[TYPE_B] + c[ALIGNED_SUCCESS]
    return n_act / n, n_abd / n, 100.0 * (n_act - n_abd) / n


def summarize(trials: Sequence[TrialRecord], *, exclude_flagged: bool = False) -> ScoreSummary:
    """Pool all iterations of ``trials`` into one ScoreSummary.

    With ``exclude_flagged`` iterations whose abduction could not be verified
    (missing metric) are dropped from every rate, keeping the class identities exact.
    """
    if not trials:
        raise EmptyInput("summarize needs at least one trial")
    pool: list[IterationRecord] = []
    excluded = 0
    for t in trials:
        for it in t.iterations:
            if exclude_flagged and MISSING_METRIC_FLAG in it.flags:
                excluded += 1
                continue
            pool.append(it)
    counts = _counts(pool)
    n = len(pool)
    n_act = counts[TYPE_A] + counts[ALIGNED_SUCCESS]
    n_abd = counts[TYPE_B] + counts[ALIGNED_SUCCESS]
    if n:
        actsr, asr = n_act / n, n_abd / n
        gap = 100.0 * (n_act - n_abd) / n
    else:
        actsr = asr = gap = 0.0

    per_trial = [r for r in (trial_rates(t) for t in trials) if r is not None]
    if per_trial:
        m = len(per_trial)
        macro = (sum(r[0] for r in per_trial) / m, sum(r[1] for r in per_trial) / m,
                 sum(r[2] for r in per_trial) / m)
    else:
        macro = (0.0, 0.0, 0.0)
    return ScoreSummary(
        actsr=actsr,
        asr=asr,
        gap_pp=gap,
        class_counts=dict(counts),
        n_iterations=n,
        n_trials=len(trials),
        actsr_macro=macro[0],
        asr_macro=macro[1],
        gap_pp_macro=macro[2],
        excluded=excluded,
    )


def rescore_iteration(it: IterationRecord, sense: str, eps: float) -> tuple[bool, bool, str]:
    """Recompute (action_success, abductive_success, class) from the stored snapshots."""
    act = action_success(it.pre, it.post, sense, eps)
    if "domain_failure" in it.flags:
        act = False
    abd, _ = score_abduction(it.decision.hypothesis, it.pre, it.post, eps)
    return act, abd, paradox_class(act, abd)


def asr_sensitivity(trials: Sequence[TrialRecord], eps_list: Sequence[float]) -> list[tuple[float, float]]:
    """ASR recomputed at each threshold in ``eps_list`` (positive, ascending)."""
    eps_values = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_values):
        raise ValueError("thresholds must be positive")
    if any(b < a for a, b in zip(eps_values, eps_values[1:])):
        raise ValueError("thresholds must be ascending")
    iterations = [it for t in trials for it in t.iterations]
    curve = []
    for eps in eps_values:
        if not iterations:
            curve.append((eps, 0.0))
            continue
        hits = sum(score_abduction(it.decision.hypothesis, it.pre, it.post, eps)[0] for it in iterations)
        curve.append((eps, hits / len(iterations)))
    return curve


__all__ = [
    "ALIGNED_FAILURE",
    "MISSING_METRIC_FLAG",
    "ScoreSummary",
    "abductive_success",
    "action_success",
    "asr_sensitivity",
    "rescore_iteration",
    "score_abduction",
    "summarize",
    "trial_rates",
]
