"""Chat-completions style HTTP agent with one schema-repair retry."""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from importlib import resources
from typing import Any

import httpx

from ..core.types import AgentDecision
from ..errors import AgentFailure, ConfigError, SchemaViolation, TransportError
from .base import AgentRequest, parse_decision

log = logging.getLogger(__name__)

PROMPT_VERSION = "v1"


def system_prompt(version: str = PROMPT_VERSION) -> str:
    return (resources.files("metricloop.agents") / "prompts" / f"system_{version}.txt").read_text()


@dataclass(frozen=True)
class LlmConfig:
    endpoint: str
    model: str
    temperature: float = 0.0
    api_key_env: str = "METRICLOOP_API_KEY"
    timeout_s: float = 120.0
    reasoning_effort: str | None = None
    json_mode: bool = True

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.timeout_s <= 0:
            raise ConfigError("timeout_s must be positive")


def render_request(request: AgentRequest) -> str:
    snap = request.snapshot
    metric_lines = []
    for name in request.metric_names:
        if name in snap.metrics:
            m = snap.metrics[name]
            metric_lines.append(f"- {name}: median={m.median:.6g} mean={m.mean:.6g} std={m.std:.3g} (n={m.n_reps})")
        else:
            metric_lines.append(f"- {name}: unavailable")
    action_lines = [f"- {a.id} [{a.category}]: {a.label}" for a in request.actions]
    return "\n".join([
        f"Domain: {request.domain_id}  (iteration {request.iteration})",
        f"Objective value now: {snap.objective_value:.6g}",
        "Current metrics:",
        *metric_lines,
        "",
        "History:",
        request.context.render(),
        "",
        "Available actions:",
        *action_lines,
        "",
        "Output JSON schema:",
        request.schema,
    ])


class LlmAgent:
    """Sends each request as system + user messages; every exchange is kept in ``transcript``."""

    def __init__(self, config: LlmConfig, *, client: httpx.Client | None = None, prompt: str | None = None):
        self.config = config
        self.agent_id = f"llm:{config.model}"
        self.prompt = prompt if prompt is not None else system_prompt()
        self._client = client or httpx.Client(timeout=config.timeout_s)
        self.transcript: list[dict[str, Any]] = []

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _body(self, messages: list[dict[str, str]]) -> dict[str, Any]:
        body: dict[str, Any] = {
            "model": self.config.model,
            "temperature": self.config.temperature,
            "messages": messages,
        }
        if self.config.json_mode:
            body["response_format"] = {"type": "json_object"}
        if self.config.reasoning_effort:
            body["reasoning_effort"] = self.config.reasoning_effort
        return body

    def complete(self, messages: list[dict[str, str]]) -> str:
        body = self._body(messages)
        entry: dict[str, Any] = {"request": body}
        self.transcript.append(entry)
        log.debug("POST %s %s", self.config.endpoint, json.dumps(body)[:2000])
        try:
            resp = self._client.post(self.config.endpoint, json=body, headers=self._headers(),
                                     timeout=self.config.timeout_s)
        except httpx.TimeoutException as exc:
            entry["error"] = f"timeout: {exc}"
            raise TransportError(f"request timed out after {self.config.timeout_s}s") from exc
        except httpx.HTTPError as exc:
            entry["error"] = str(exc)
            raise TransportError(f"transport error: {exc}") from exc
        entry["status"] = resp.status_code
        entry["response"] = resp.text
        log.debug("response %s %s", resp.status_code, resp.text[:2000])
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:300]}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response shape: {resp.text[:300]}") from exc
        if not isinstance(content, str):
            raise TransportError("response content is not text")
        return content

    def decide(self, request: AgentRequest) -> AgentDecision:
        messages = [
            {"role": "system", "content": self.prompt},
            {"role": "user", "content": render_request(request)},
        ]
        raw = self.complete(messages)
        try:
            return parse_decision(raw, request)
        except SchemaViolation as first:
            log.info("schema violation, sending repair prompt: %s", first)
            messages += [
                {"role": "assistant", "content": raw},
                {"role": "user", "content": f"Your response failed validation: {first}\n"
                                            "Reply again with one corrected JSON object only."},
            ]
        raw = self.complete(messages)
        try:
            return parse_decision(raw, request)
        except SchemaViolation as second:
            raise AgentFailure(f"invalid output after repair attempt: {second}") from second
