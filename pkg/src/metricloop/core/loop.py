"""The observe / hypothesize / act / feedback loop."""

from __future__ import annotations

import logging

from ..analysis.scoring import action_success, score_abduction
from ..errors import AgentFailure, ConfigError, DomainFailure
from .types import (
    AgentDecision,
    ContextWindow,
    IterationRecord,
    LoopConfig,
    MetricSnapshot,
    TrialRecord,
    paradox_class,
)

log = logging.getLogger(__name__)

DOMAIN_FAILURE_FLAG = "domain_failure"


def build_context(trial_so_far: TrialRecord, k: int, *, include_baseline: bool = True) -> ContextWindow:
    """The last ``min(k, len(iterations))`` iterations, oldest first, plus the baseline."""
    if k < 1:
        raise ConfigError(f"history window must be >= 1, got {k}")
    entries = trial_so_far.iterations[-k:]
    return ContextWindow(
        entries=tuple(entries),
        baseline=trial_so_far.baseline if include_baseline else None,
    )


def _request(domain, trial: TrialRecord, pre: MetricSnapshot, config: LoopConfig):
    # imported lazily: agents.base depends on core.types
    from ..agents.base import AgentRequest, schema_description

    actions = tuple(domain.actions())
    include_baseline = config.baseline_visible or not trial.iterations
    window = build_context(trial, config.history_window_k, include_baseline=include_baseline)
    window = ContextWindow(
        entries=window.entries,
        baseline=window.baseline,
        action_labels={a.id: a.label for a in actions},
    )
    return AgentRequest(
        domain_id=domain.domain_id,
        metric_names=tuple(domain.metric_names),
        snapshot=pre,
        actions=actions,
        context=window,
        schema=schema_description(domain.metric_names, [a.id for a in actions]),
        metric_goals=dict(domain.metric_goals),
        baseline=trial.baseline if include_baseline else None,
        iteration=len(trial.iterations),
        seed=config.seed,
    )


def score_step(index: int, pre: MetricSnapshot, decision: AgentDecision, post: MetricSnapshot,
               sense: str, eps: float, flags: tuple[str, ...] = ()) -> IterationRecord:
    act = action_success(pre, post, sense, eps)
    if DOMAIN_FAILURE_FLAG in flags:
        act = False
    abd, extra = score_abduction(decision.hypothesis, pre, post, eps)
    return IterationRecord(
        index=index,
        pre=pre,
        decision=decision,
        post=post,
        objective_delta=post.objective_value - pre.objective_value,
        action_success=act,
        abductive_success=abd,
        paradox_class=paradox_class(act, abd),
        flags=tuple(flags) + extra,
    )


def run_trial(domain, agent, config: LoopConfig) -> TrialRecord:
    """Run ``config.n_iterations`` loop steps of ``agent`` against ``domain``.

    Domain failures are recorded (post = pre, action failed) and the loop goes on.
    An agent failure truncates the trial; the record is marked and returned.
    """
    config = config.validate().with_sense(domain.objective_sense)
    sense = config.objective_sense
    eps = config.noise_epsilon_rel
    baseline = domain.reset(config.seed)
    benchmark = getattr(domain, "benchmark", "")
    actions = {a.id: a for a in domain.actions()}

    iterations: list[IterationRecord] = []
    pre = baseline
    status, failure = "complete", None
    for index in range(config.n_iterations):
        so_far = TrialRecord(domain.domain_id, agent.agent_id, config, tuple(iterations), baseline, benchmark)
        try:
            decision = agent.decide(_request(domain, so_far, pre, config))
            if decision.action_id not in actions:
                raise AgentFailure(f"agent chose unknown action {decision.action_id!r}")
        except AgentFailure as exc:
            log.warning("agent %s failed at iteration %d: %s", agent.agent_id, index, exc)
            status, failure = "truncated", f"{type(exc).__name__} at iteration {index}: {exc}"
            break

        flags: tuple[str, ...] = ()
        try:
            post = domain.step(actions[decision.action_id], decision)
        except DomainFailure as exc:
            log.warning("domain %s failed at iteration %d: %s", domain.domain_id, index, exc)
            post = pre
            flags = (DOMAIN_FAILURE_FLAG,)
        if post.notes.get("diverged") == "true":
            flags += ("diverged",)
        if post.notes.get("clamped") == "true":
            flags += ("clamped",)
        record = score_step(index, pre, decision, post, sense, eps, flags)
        iterations.append(record)
        pre = post

    return TrialRecord(
        domain_id=domain.domain_id,
        agent_id=agent.agent_id,
        config=config,
        iterations=tuple(iterations),
        baseline=baseline,
        benchmark=benchmark,
        status=status,
        failure=failure,
    )
