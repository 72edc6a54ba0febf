"""Agent implementations behind one ``decide(request) -> AgentDecision`` interface."""

from .base import AgentRequest, parse_decision, render_decision, schema_description
from .llm import LlmAgent, LlmConfig
from .replay import RecordedDomain, ReplayAgent
from .scripted import PriorAgent, RandomAgent, SignalAgent, make_scripted

__all__ = [
    "AgentRequest",
    "LlmAgent",
    "LlmConfig",
    "PriorAgent",
    "RandomAgent",
    "RecordedDomain",
    "ReplayAgent",
    "SignalAgent",
    "make_scripted",
    "parse_decision",
    "render_decision",
    "schema_description",
]
