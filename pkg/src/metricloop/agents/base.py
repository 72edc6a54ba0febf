"""Request type handed to agents and the strict decision parser."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from ..core.types import DIRECTIONS, ActionSpec, AgentDecision, ContextWindow, Hypothesis, MetricSnapshot
from ..errors import SchemaViolation

OUTPUT_SCHEMA: dict[str, Any] = {
    "type": "object",
    "required": ["hypothesis", "action_id", "rationale"],
    "properties": {
        "hypothesis": {
            "type": "object",
            "required": ["mechanism", "target_metric", "predicted_direction"],
            "properties": {
                "mechanism": {"type": "string"},
                "target_metric": {"type": "string", "enum": "<metric list>"},
                "predicted_direction": {"type": "string", "enum": list(DIRECTIONS)},
            },
        },
        "action_id": {"type": "string", "enum": "<action roster>"},
        "rationale": {"type": "string"},
        "marker": {"type": "string", "optional": True},
    },
}


def schema_description(metric_names: Sequence[str], action_ids: Sequence[str]) -> str:
    schema = json.loads(json.dumps(OUTPUT_SCHEMA))
    schema["properties"]["hypothesis"]["properties"]["target_metric"]["enum"] = list(metric_names)
    schema["properties"]["action_id"]["enum"] = list(action_ids)
    return json.dumps(schema, indent=2)


@dataclass(frozen=True)
class AgentRequest:
    domain_id: str
    metric_names: tuple[str, ...]
    snapshot: MetricSnapshot
    actions: tuple[ActionSpec, ...]
    context: ContextWindow
    schema: str
    metric_goals: Mapping[str, str] = field(default_factory=dict)
    baseline: MetricSnapshot | None = None
    iteration: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.actions:
            raise ValueError("action roster must be nonempty")

    def action(self, action_id: str) -> ActionSpec:
        for a in self.actions:
            if a.id == action_id:
                return a
        raise KeyError(action_id)

    @property
    def action_ids(self) -> tuple[str, ...]:
        return tuple(a.id for a in self.actions)


_FENCE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)


def _extract_json(raw: str) -> Any:
    text = raw.strip()
    m = _FENCE.search(text)
    if m:
        text = m.group(1).strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        pass
    start, end = text.find("{"), text.rfind("}")
    if start == -1 or end <= start:
        raise SchemaViolation("$", "no JSON object found in agent output")
    try:
        return json.loads(text[start:end + 1])
    except json.JSONDecodeError as exc:
        raise SchemaViolation("$", f"invalid JSON: {exc.msg}") from None


def _require_str(obj: Mapping[str, Any], key: str, path: str) -> str:
    if key not in obj:
        raise SchemaViolation(path + key, "missing required field")
    value = obj[key]
    if not isinstance(value, str):
        raise SchemaViolation(path + key, f"expected string, got {type(value).__name__}")
    return value


def parse_decision(raw: str, request: AgentRequest) -> AgentDecision:
    """Validate a raw agent response against the request's metric list and roster.

    Unknown extra fields are tolerated and survive only in ``raw_output``.
    """
    data = _extract_json(raw)
    if not isinstance(data, dict):
        raise SchemaViolation("$", "top-level value must be an object")
    hyp = data.get("hypothesis")
    if hyp is None:
        raise SchemaViolation("hypothesis", "missing required field")
    if not isinstance(hyp, dict):
        raise SchemaViolation("hypothesis", "expected object")
    mechanism = _require_str(hyp, "mechanism", "hypothesis.")
    target = _require_str(hyp, "target_metric", "hypothesis.")
    if target not in request.metric_names:
        raise SchemaViolation(
            "hypothesis.target_metric",
            f"unknown metric {target!r}; expected one of {list(request.metric_names)}",
        )
    direction = _require_str(hyp, "predicted_direction", "hypothesis.")
    if direction not in DIRECTIONS:
        raise SchemaViolation("hypothesis.predicted_direction", f"must be one of {list(DIRECTIONS)}, got {direction!r}")
    action_id = _require_str(data, "action_id", "")
    if action_id not in request.action_ids:
        raise SchemaViolation("action_id", f"unknown action {action_id!r}")
    rationale = _require_str(data, "rationale", "")
    marker = data.get("marker")
    if marker is not None and not isinstance(marker, str):
        raise SchemaViolation("marker", "expected string")
    return AgentDecision(
        hypothesis=Hypothesis(mechanism=mechanism, target_metric=target, predicted_direction=direction),
        action_id=action_id,
        rationale=rationale,
        raw_output=raw,
        marker=marker,
    )


def render_decision(hypothesis: Hypothesis, action_id: str, rationale: str, marker: str | None = None) -> str:
    """Canonical JSON text for a decision, used by the built-in policies."""
    body: dict[str, Any] = {
        "hypothesis": {
            "mechanism": hypothesis.mechanism,
            "target_metric": hypothesis.target_metric,
            "predicted_direction": hypothesis.predicted_direction,
        },
        "action_id": action_id,
        "rationale": rationale,
    }
    if marker is not None:
        body["marker"] = marker
    return json.dumps(body, sort_keys=True)
