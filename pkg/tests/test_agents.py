from __future__ import annotations

import json
from types import SimpleNamespace

import httpx
import pytest

from conftest import synth_trial
from metricloop.agents import (AgentRequest, LlmAgent, LlmConfig, PriorAgent, RandomAgent, RecordedDomain,
                               ReplayAgent, SignalAgent, make_scripted, parse_decision, render_decision,
                               schema_description)
from metricloop.agents.scripted import COMPILER_SIGNAL_TABLE, corrupt_beliefs, synth_prior_choice
from metricloop.core import ContextWindow, Hypothesis, LoopConfig, MetricSnapshot, MetricSummary, run_trial
from metricloop.core.records import read_trial, serialize_trial
from metricloop.domains import compiler, synth
from metricloop.errors import AgentFailure, ConfigError, SchemaViolation, TransportError


def _snap(**metrics: float) -> MetricSnapshot:
    return MetricSnapshot({k: MetricSummary.single(v) for k, v in metrics.items()}, 1.0, 0.0)


BASE = _snap(wall_time_s=1.0, ipc=1.5, l1d_miss_rate=0.10, branch_miss_rate=0.010)


def compiler_request(snapshot: MetricSnapshot = BASE, baseline: MetricSnapshot | None = BASE, iteration=0):
    actions = tuple(compiler.list_actions())
    return AgentRequest(
        domain_id="compiler",
        metric_names=compiler.METRIC_NAMES,
        snapshot=snapshot,
        actions=actions,
        context=ContextWindow((), baseline),
        schema=schema_description(compiler.METRIC_NAMES, [a.id for a in actions]),
        metric_goals=compiler.METRIC_GOALS,
        baseline=baseline,
        iteration=iteration,
    )


GOOD = {"hypothesis": {"mechanism": "misses", "target_metric": "l1d_miss_rate", "predicted_direction": "decrease"},
        "action_id": "vectorize_enable", "rationale": "because"}


# --- parser -------------------------------------------------------------------

def test_parse_well_formed():
    raw = json.dumps(GOOD)
    d = parse_decision(raw, compiler_request())
    assert d.action_id == "vectorize_enable"
    assert d.hypothesis == Hypothesis("misses", "l1d_miss_rate", "decrease")
    assert d.raw_output == raw


def test_parse_unknown_metric_names_field():
    bad = json.loads(json.dumps(GOOD))
    bad["hypothesis"]["target_metric"] = "cache_misses"
    with pytest.raises(SchemaViolation) as info:
        parse_decision(json.dumps(bad), compiler_request())
    assert info.value.field == "hypothesis.target_metric"
    assert "cache_misses" in str(info.value)


def test_parse_extra_fields_kept_only_in_raw():
    payload = dict(GOOD, confidence=0.9, notes={"x": 1})
    raw = json.dumps(payload)
    d = parse_decision(raw, compiler_request())
    assert d.raw_output == raw
    assert not hasattr(d, "confidence")


@pytest.mark.parametrize("mutate,field", [
    (lambda p: p.pop("action_id"), "action_id"),
    (lambda p: p.pop("rationale"), "rationale"),
    (lambda p: p.pop("hypothesis"), "hypothesis"),
    (lambda p: p["hypothesis"].pop("mechanism"), "hypothesis.mechanism"),
    (lambda p: p["hypothesis"].update(predicted_direction="up"), "hypothesis.predicted_direction"),
    (lambda p: p.update(action_id="vectorize_always"), "action_id"),
    (lambda p: p.update(action_id=3), "action_id"),
])
def test_parse_strict_required_fields(mutate, field):
    payload = json.loads(json.dumps(GOOD))
    mutate(payload)
    with pytest.raises(SchemaViolation) as info:
        parse_decision(json.dumps(payload), compiler_request())
    assert info.value.field == field


def test_parse_fenced_and_embedded_json():
    req = compiler_request()
    assert parse_decision("```json\n" + json.dumps(GOOD) + "\n```", req).action_id == "vectorize_enable"
    assert parse_decision("Sure! " + json.dumps(GOOD) + " Hope that helps.", req).action_id == "vectorize_enable"
    with pytest.raises(SchemaViolation):
        parse_decision("no json here", req)


def test_render_decision_roundtrip():
    h = Hypothesis("m", "ipc", "increase")
    raw = render_decision(h, "unroll_count_4", "r", marker="L1")
    d = parse_decision(raw, compiler_request())
    assert (d.hypothesis, d.action_id, d.marker) == (h, "unroll_count_4", "L1")


def test_schema_lists_roster():
    schema = json.loads(compiler_request().schema)
    assert schema["properties"]["action_id"]["enum"] == [a.id for a in compiler.list_actions()]
    assert schema["properties"]["hypothesis"]["properties"]["target_metric"]["enum"] == list(compiler.METRIC_NAMES)


# --- scripted -------------------------------------------------------------------

def test_signal_agent_picks_largest_relative_deterioration():
    now = _snap(wall_time_s=1.05, ipc=1.2, l1d_miss_rate=0.11, branch_miss_rate=0.010)
    d = SignalAgent(COMPILER_SIGNAL_TABLE).decide(compiler_request(now))
    # ipc fell 20%, l1d rose 10%, wall time rose 5%
    assert d.hypothesis.target_metric == "ipc"
    assert d.hypothesis.predicted_direction == "increase"
    assert d.action_id == COMPILER_SIGNAL_TABLE["ipc"]


def test_signal_agent_deterministic():
    agent = SignalAgent(COMPILER_SIGNAL_TABLE)
    now = _snap(wall_time_s=1.2, ipc=1.5, l1d_miss_rate=0.10, branch_miss_rate=0.010)
    assert agent.decide(compiler_request(now)) == agent.decide(compiler_request(now))


def test_prior_agent_ignores_metrics():
    agent = make_scripted("prior", SimpleNamespace(domain_id="compiler"))
    a = agent.decide(compiler_request(_snap(wall_time_s=9.0, ipc=0.1, l1d_miss_rate=0.9, branch_miss_rate=0.5)))
    b = agent.decide(compiler_request())
    assert a == b
    assert a.hypothesis.target_metric == "l1d_miss_rate" and a.hypothesis.predicted_direction == "decrease"
    assert a.action_id.startswith("vectorize")


def test_random_agent_seeded():
    req = compiler_request()
    assert RandomAgent(3).decide(req) == RandomAgent(3).decide(req)
    picks = {RandomAgent(s).decide(req).action_id for s in range(40)}
    assert len(picks) > 5


def test_corrupted_beliefs():
    table = synth.SynthSpec(seed=1).effect_table
    assert (corrupt_beliefs(table, 0.0, 5) == table).all()
    assert (corrupt_beliefs(table, 1.0, 5) == -table).all()
    with pytest.raises(ValueError):
        corrupt_beliefs(table, 1.5, 0)


def test_synth_prior_choice_uses_expected_effect():
    spec = synth.SynthSpec(seed=1)
    metric, action = synth_prior_choice(spec, spec.effect_table)
    best = int(spec.effect_table.mean(axis=0).argmax())
    assert action == synth.action_id(best)
    assert metric == synth.signal_name(best % spec.n_causes)


def test_scripted_trials_bitwise_deterministic():
    for kind in ("signal", "prior"):
        assert serialize_trial(synth_trial(seed=4, kind=kind)) == serialize_trial(synth_trial(seed=4, kind=kind))


# --- replay -------------------------------------------------------------------

def test_replay_emits_in_order_then_fails():
    t = synth_trial(seed=2, n=4)
    domain = synth.SynthDomain(synth.SynthSpec(seed=3))
    agent = ReplayAgent.from_trial(t)
    t2 = run_trial(domain, agent, LoopConfig(n_iterations=4, seed=2))
    assert [it.decision for it in t2.iterations] == [it.decision for it in t.iterations]
    t3 = run_trial(domain, ReplayAgent.from_trial(t), LoopConfig(n_iterations=6, seed=2))
    assert len(t3.iterations) == 4 and t3.status == "truncated" and "exhausted" in t3.failure


def test_replay_roster_mismatch_is_agent_failure():
    t = synth_trial(seed=2, n=1)
    agent = ReplayAgent.from_trial(t)
    with pytest.raises(AgentFailure):
        agent.decide(compiler_request())


def test_recorded_domain_reproduces_fixture(fixtures_dir):
    path = fixtures_dir / "jacobi_type_a.jsonl"
    recorded = read_trial(path)
    again = run_trial(RecordedDomain.for_domain(recorded, compiler), ReplayAgent.from_trial(recorded),
                      recorded.config)
    assert serialize_trial(again) == path.read_bytes()


def test_live_trial_converts_to_replay_fixture():
    t = synth_trial(seed=6, rho=0.5)
    domain = synth.SynthDomain(synth.SynthSpec(observability_rho=0.5, seed=3))
    again = run_trial(domain, ReplayAgent.from_trial(t), t.config)
    assert serialize_trial(again) == serialize_trial(t)


# --- LLM over HTTP --------------------------------------------------------------

def _chat(content: str) -> dict:
    return {"choices": [{"message": {"role": "assistant", "content": content}}]}


def _agent(handler, **cfg) -> LlmAgent:
    client = httpx.Client(transport=httpx.MockTransport(handler))
    return LlmAgent(LlmConfig(endpoint="http://llm.test/v1/chat/completions", model="m", **cfg), client=client)


def test_llm_happy_path(monkeypatch):
    monkeypatch.setenv("METRICLOOP_API_KEY", "sk-test")
    seen = []

    def handler(request: httpx.Request) -> httpx.Response:
        seen.append(request)
        return httpx.Response(200, json=_chat(json.dumps(GOOD)))

    agent = _agent(handler, reasoning_effort="high")
    d = agent.decide(compiler_request())
    assert d.action_id == "vectorize_enable" and d.raw_output == json.dumps(GOOD)
    body = json.loads(seen[0].content)
    assert body["temperature"] == 0.0 and body["model"] == "m" and body["reasoning_effort"] == "high"
    assert [m["role"] for m in body["messages"]] == ["system", "user"]
    assert "vectorize_enable" in body["messages"][1]["content"]
    assert seen[0].headers["authorization"] == "Bearer sk-test"
    assert len(agent.transcript) == 1 and agent.transcript[0]["status"] == 200


def test_llm_repair_sends_validator_error():
    bad = json.loads(json.dumps(GOOD))
    bad["hypothesis"]["target_metric"] = "cache_misses"
    replies = [json.dumps(bad), json.dumps(GOOD)]
    bodies = []

    def handler(request):
        bodies.append(json.loads(request.content))
        return httpx.Response(200, json=_chat(replies.pop(0)))

    d = _agent(handler).decide(compiler_request())
    assert d.hypothesis.target_metric == "l1d_miss_rate"
    repair = bodies[1]["messages"]
    assert repair[-2] == {"role": "assistant", "content": json.dumps(bad)}
    assert "hypothesis.target_metric" in repair[-1]["content"]


def test_llm_second_violation_is_agent_failure():
    def handler(request):
        return httpx.Response(200, json=_chat("{}"))

    agent = _agent(handler)
    with pytest.raises(AgentFailure) as info:
        agent.decide(compiler_request())
    assert not isinstance(info.value, TransportError)
    assert len(agent.transcript) == 2


def test_llm_timeout_is_transport_error():
    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    with pytest.raises(TransportError):
        _agent(handler, timeout_s=0.5).decide(compiler_request())


@pytest.mark.parametrize("response", [
    httpx.Response(500, text="boom"),
    httpx.Response(200, json={"unexpected": True}),
    httpx.Response(200, text="not json"),
])
def test_llm_bad_responses_are_transport_errors(response):
    with pytest.raises(TransportError):
        _agent(lambda request: response).decide(compiler_request())


def test_llm_config_validation():
    with pytest.raises(ConfigError):
        LlmConfig(endpoint="http://x", model="m", temperature=-0.1)


def test_llm_agent_truncates_trial_without_crashing():
    domain = synth.SynthDomain(synth.SynthSpec(seed=3))
    agent = _agent(lambda request: httpx.Response(200, json=_chat("nope")))
    t = run_trial(domain, agent, LoopConfig(n_iterations=3))
    assert t.status == "truncated" and len(t.iterations) == 0
