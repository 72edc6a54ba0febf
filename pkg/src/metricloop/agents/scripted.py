"""Deterministic built-in policies.

``SignalAgent`` reads the metrics: it blames the metric that deteriorated most
since baseline, predicts it will move back, and takes the action its table maps
to that metric. ``PriorAgent`` ignores the metrics and always applies a fixed
heuristic. ``RandomAgent`` samples uniformly from a seeded stream.
"""

from __future__ import annotations

from typing import Mapping

import numpy as np

from ..core.types import AgentDecision, Hypothesis
from ..domains import synth
from .base import AgentRequest, parse_decision, render_decision


def _decision(request: AgentRequest, hypothesis: Hypothesis, action_id: str, rationale: str) -> AgentDecision:
    raw = render_decision(hypothesis, action_id, rationale)
    return parse_decision(raw, request)


class SignalAgent:
    def __init__(self, table: Mapping[str, str], mechanisms: Mapping[str, str] | None = None,
                 agent_id: str = "scripted:signal"):
        if not table:
            raise ValueError("signal table must map at least one metric to an action")
        self.table = dict(table)
        self.mechanisms = dict(mechanisms or {})
        self.agent_id = agent_id

    def _sign(self, request: AgentRequest, metric: str) -> float:
        # +1 when larger values are worse
        return 1.0 if request.metric_goals.get(metric, "decrease") == "decrease" else -1.0

    def pick_metric(self, request: AgentRequest) -> str:
        snap = request.snapshot
        base = request.baseline or snap
        candidates = [m for m in self.table if m in snap.metrics and m in base.metrics]
        if not candidates:
            return next(iter(self.table))
        scores = {}
        for m in candidates:
            b, now = base.median(m), snap.median(m)
            change = self._sign(request, m) * (now - b)
            scores[m] = change / abs(b) if b != 0 else change
        worst = max(candidates, key=lambda m: scores[m])
        if scores[worst] > 0:
            return worst
        # nothing got worse: fall back to the most alarming current reading
        return max(candidates, key=lambda m: self._sign(request, m) * snap.median(m))

    def decide(self, request: AgentRequest) -> AgentDecision:
        metric = self.pick_metric(request)
        direction = request.metric_goals.get(metric, "decrease")
        mechanism = self.mechanisms.get(metric, f"{metric} is the active bottleneck")
        hyp = Hypothesis(mechanism=mechanism, target_metric=metric, predicted_direction=direction)
        return _decision(request, hyp, self.table[metric], f"{metric} shows the largest deterioration")


class PriorAgent:
    def __init__(self, target_metric: str, direction: str, action_id: str, mechanism: str,
                 agent_id: str = "scripted:prior"):
        self.hypothesis = Hypothesis(mechanism=mechanism, target_metric=target_metric,
                                     predicted_direction=direction)
        self.action_id = action_id
        self.agent_id = agent_id

    def decide(self, request: AgentRequest) -> AgentDecision:
        return _decision(request, self.hypothesis, self.action_id, "standard practice for this kind of workload")


class RandomAgent:
    def __init__(self, seed: int = 0, agent_id: str = "random"):
        self.seed = seed
        self.agent_id = agent_id

    def decide(self, request: AgentRequest) -> AgentDecision:
        rng = np.random.default_rng([self.seed, request.seed, request.iteration])
        action = request.actions[int(rng.integers(len(request.actions)))]
        metric = request.metric_names[int(rng.integers(len(request.metric_names)))]
        direction = ("increase", "decrease")[int(rng.integers(2))]
        hyp = Hypothesis(mechanism="random guess", target_metric=metric, predicted_direction=direction)
        return _decision(request, hyp, action.id, "uniformly sampled")


# --- per-domain presets ---------------------------------------------------

COMPILER_SIGNAL_TABLE = {
    "wall_time_s": "vectorize_enable",
    "ipc": "unroll_count_4",
    "l1d_miss_rate": "prefetch_16",
    "branch_miss_rate": "unroll_count_8",
}
COMPILER_MECHANISMS = {
    "wall_time_s": "the loop body is compute bound and not vectorized",
    "ipc": "loop overhead limits instruction-level parallelism",
    "l1d_miss_rate": "streaming loads miss in L1; prefetching hides latency",
    "branch_miss_rate": "loop back-edge mispredictions; unrolling removes branches",
}

TRAIN_SIGNAL_TABLE = {
    "val_loss": "lr_down_2x",
    "train_loss": "lr_up_2x",
    "val_accuracy": "dropout_up_0.1",
    "grad_norm_mean": "clip_1.0",
    "grad_norm_max": "clip_1.0",
    "loss_variance": "batch_up_2x",
    "convergence_rate": "lr_up_2x",
}
TRAIN_MECHANISMS = {
    "val_loss": "step size too large for the loss landscape",
    "train_loss": "underfitting from slow optimisation",
    "val_accuracy": "overfitting to the training set",
    "grad_norm_mean": "gradient magnitudes destabilise updates",
    "grad_norm_max": "gradient spikes destabilise updates",
    "loss_variance": "minibatch noise dominates the update",
    "convergence_rate": "learning rate too small to make progress",
}


def corrupt_beliefs(table: np.ndarray, level: float, seed: int) -> np.ndarray:
    """Copy of ``table`` with each cause row negated with probability ``level``."""
    if not 0.0 <= level <= 1.0:
        raise ValueError("corruption level must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    beliefs = np.array(table, dtype=float)
    flips = rng.random(beliefs.shape[0]) < level
    beliefs[flips] *= -1.0
    return beliefs


def synth_signal_table(spec: synth.SynthSpec, beliefs: np.ndarray) -> dict[str, str]:
    """signal_k -> believed-best action among those addressing cause k."""
    table = {}
    for c in range(spec.n_causes):
        addressing = [a for a in range(spec.n_actions) if synth.addressed_cause(a, spec.n_causes) == c]
        pool = addressing or list(range(spec.n_actions))
        best = max(pool, key=lambda a: beliefs[c, a])
        table[synth.signal_name(c)] = synth.action_id(best)
    return table


def synth_prior_choice(spec: synth.SynthSpec, beliefs: np.ndarray) -> tuple[str, str]:
    """(target metric, action id) maximising believed effect under a uniform cause prior."""
    expected = beliefs.mean(axis=0)
    best = int(np.argmax(expected))
    return synth.signal_name(synth.addressed_cause(best, spec.n_causes)), synth.action_id(best)


def make_scripted(kind: str, domain, *, corruption: float = 0.0, seed: int = 0):
    """Build the scripted ``kind`` ("signal" or "prior") preset for ``domain``."""
    did = domain.domain_id
    if did == "synth":
        beliefs = corrupt_beliefs(domain.spec.effect_table, corruption, seed)
        if kind == "signal":
            return SignalAgent(synth_signal_table(domain.spec, beliefs),
                               {m: f"cause {m.split('_')[1]} is the bottleneck" for m in domain.metric_names})
        metric, action = synth_prior_choice(domain.spec, beliefs)
        return PriorAgent(metric, "decrease", action, "the usual bottleneck for this system")
    if did == "compiler":
        if kind == "signal":
            return SignalAgent(COMPILER_SIGNAL_TABLE, COMPILER_MECHANISMS)
        return PriorAgent("l1d_miss_rate", "decrease", "vectorize_enable", "reduce cache misses via vectorization")
    if did == "train":
        if kind == "signal":
            return SignalAgent(TRAIN_SIGNAL_TABLE, TRAIN_MECHANISMS)
        return PriorAgent("loss_variance", "decrease", "lr_down_2x", "a smaller learning rate stabilises training")
    raise ValueError(f"no scripted presets for domain {did!r}")
