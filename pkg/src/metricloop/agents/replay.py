"""Replay recorded decisions (and optionally recorded measurements)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

from ..core.records import read_trial
from ..core.types import ActionSpec, AgentDecision, MetricSnapshot, TrialRecord
from ..errors import AgentFailure, DomainFailure


class ReplayAgent:
    """Emits the decisions of a recorded trial in order; exhaustion is an AgentFailure."""

    def __init__(self, decisions: Sequence[AgentDecision], agent_id: str = "replay"):
        self.decisions = list(decisions)
        self.agent_id = agent_id
        self.position = 0

    @classmethod
    def from_trial(cls, trial: TrialRecord, agent_id: str | None = None) -> ReplayAgent:
        return cls([it.decision for it in trial.iterations], agent_id or trial.agent_id)

    @classmethod
    def from_file(cls, path: str | Path, agent_id: str | None = None) -> ReplayAgent:
        return cls.from_trial(read_trial(path), agent_id)

    def decide(self, request) -> AgentDecision:
        if self.position >= len(self.decisions):
            raise AgentFailure(f"replay fixture exhausted after {len(self.decisions)} decisions")
        decision = self.decisions[self.position]
        self.position += 1
        if decision.action_id not in request.action_ids:
            raise AgentFailure(f"recorded action {decision.action_id!r} not in this domain's roster")
        return decision


class RecordedDomain:
    """Serves a recorded trial's snapshots so a trial can be reproduced offline.

    Each step must request the action that was recorded at that position.
    """

    def __init__(self, trial: TrialRecord, actions: Sequence[ActionSpec], metric_names: Sequence[str],
                 metric_goals: dict[str, str], objective_sense: str):
        self.trial = trial
        self.domain_id = trial.domain_id
        self.benchmark = trial.benchmark
        self.objective_sense = objective_sense
        self.metric_names = tuple(metric_names)
        self.metric_goals = dict(metric_goals)
        self._actions = list(actions)
        self.position = 0

    @classmethod
    def for_domain(cls, trial: TrialRecord, domain_module) -> RecordedDomain:
        return cls(trial, domain_module.list_actions(), domain_module.METRIC_NAMES, domain_module.METRIC_GOALS,
                   trial.config.objective_sense or "maximize")

    def actions(self) -> list[ActionSpec]:
        return list(self._actions)

    def reset(self, seed: int) -> MetricSnapshot:
        self.position = 0
        return self.trial.baseline

    def step(self, action: ActionSpec, decision: AgentDecision) -> MetricSnapshot:
        if self.position >= len(self.trial.iterations):
            raise DomainFailure("recorded measurements exhausted")
        it = self.trial.iterations[self.position]
        self.position += 1
        if it.decision.action_id != action.id:
            raise DomainFailure(f"recorded action was {it.decision.action_id!r}, got {action.id!r}")
        if "domain_failure" in it.flags:
            raise DomainFailure("recorded domain failure")
        return it.post
