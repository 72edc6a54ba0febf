"""Hidden-cause environment with a single observability dial.

The harness draws a true cause per trial. The agent sees one symbol per
observation, passed through a symmetric channel: with probability ``rho`` the
symbol is the true cause, otherwise uniform over the other symbols. At
``rho = 1/n_causes`` the symbol carries no information; at ``rho = 1`` it names
the cause.

Each action *addresses* one cause (``action % n_causes``). Addressing the true
cause halves the bottleneck intensity that the indicator metrics report, so a
correct diagnosis is checkable through the observed symbol even when the chosen
action hurts the objective. Objective effects come from the effect table.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..analysis.info import JointDistribution, observability_gap
from ..core.types import ActionSpec, AgentDecision, MetricSnapshot, MetricSummary
from ..errors import ConfigError, UnknownAction

DAMPING = 0.5
START_OBJECTIVE = 1.0


def signal_name(cause: int) -> str:
    return f"signal_{cause}"


def addressed_cause(action: int, n_causes: int) -> int:
    return action % n_causes


def random_effect_table(n_causes: int, n_actions: int, seed: int) -> np.ndarray:
    """Seeded table where every cause has one clear best action.

    The first action addressing a cause is its fix (+0.6..1.0); further actions
    addressing it over-correct (-0.5..-0.2); everything else is a mild side
    effect (-0.1..0.3).
    """
    rng = np.random.default_rng(seed)
    table = rng.uniform(-0.1, 0.3, size=(n_causes, n_actions))
    for a in range(n_actions):
        c = addressed_cause(a, n_causes)
        table[c, a] = rng.uniform(0.6, 1.0) if a < n_causes else rng.uniform(-0.5, -0.2)
    return table


@dataclass(frozen=True)
class SynthSpec:
    n_causes: int = 4
    observability_rho: float = 1.0
    n_actions: int = 8
    seed: int = 0
    effect_table: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.n_causes < 2:
            raise ConfigError("n_causes must be >= 2")
        if self.n_actions < 2:
            raise ConfigError("n_actions must be >= 2")
        if not 0.0 <= self.observability_rho <= 1.0:
            raise ConfigError("observability_rho must lie in [0, 1]")
        table = self.effect_table
        if table is None:
            table = random_effect_table(self.n_causes, self.n_actions, self.seed)
        table = np.asarray(table, dtype=float)
        if table.shape != (self.n_causes, self.n_actions):
            raise ConfigError(f"effect table shape {table.shape} != ({self.n_causes}, {self.n_actions})")
        if not np.all(np.isfinite(table)):
            raise ConfigError("effect table must be finite")
        for c in range(self.n_causes):
            row = table[c]
            if np.sum(row == row.max()) != 1:
                raise ConfigError(f"cause {c} has tied best actions")
        table.setflags(write=False)
        object.__setattr__(self, "effect_table", table)

    def with_rho(self, rho: float) -> SynthSpec:
        return replace(self, observability_rho=rho)

    def channel(self) -> np.ndarray:
        """Row-stochastic P(symbol | cause)."""
        n, rho = self.n_causes, self.observability_rho
        off = (1.0 - rho) / (n - 1)
        ch = np.full((n, n), off)
        np.fill_diagonal(ch, rho)
        return ch

    def best_action(self, cause: int) -> int:
        return int(np.argmax(self.effect_table[cause]))


def load_effect_table(path: str | Path, n_causes: int, n_actions: int) -> np.ndarray:
    """Read (cause, action, delta) rows; every pair must appear exactly once."""
    table = np.full((n_causes, n_actions), np.nan)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            c, a = int(row["cause"]), int(row["action"])
            if not np.isnan(table[c, a]):
                raise ConfigError(f"duplicate effect row for cause {c}, action {a}")
            table[c, a] = float(row["delta"])
    if np.isnan(table).any():
        raise ConfigError("effect table is not total over causes x actions")
    return table


@dataclass(frozen=True)
class SynthState:
    true_cause: int
    objective: float = START_OBJECTIVE
    step: int = 0
    intensity: float = 1.0


def draw_symbol(state: SynthState, spec: SynthSpec, rng: np.random.Generator) -> int:
    return int(rng.choice(spec.n_causes, p=spec.channel()[state.true_cause]))


def observe(state: SynthState, spec: SynthSpec, rng: np.random.Generator) -> MetricSnapshot:
    """One channel draw, encoded as indicator metrics scaled by bottleneck intensity."""
    symbol = draw_symbol(state, spec, rng)
    metrics = {
        signal_name(k): MetricSummary.single(state.intensity if k == symbol else 0.0)
        for k in range(spec.n_causes)
    }
    return MetricSnapshot(metrics=metrics, objective_value=state.objective, captured_at=float(state.step),
                          notes={"symbol": str(symbol)})


def apply(state: SynthState, action: int, spec: SynthSpec) -> SynthState:
    if not 0 <= action < spec.n_actions:
        raise UnknownAction(f"action {action} not in roster of {spec.n_actions}")
    intensity = state.intensity
    if addressed_cause(action, spec.n_causes) == state.true_cause:
        intensity *= DAMPING
    return SynthState(
        true_cause=state.true_cause,
        objective=state.objective + float(spec.effect_table[state.true_cause, action]),
        step=state.step + 1,
        intensity=intensity,
    )


def true_gap(spec: SynthSpec) -> float:
    prior = np.full(spec.n_causes, 1.0 / spec.n_causes)
    return observability_gap(JointDistribution.from_channel(prior, spec.channel()))


def binary_entropy(p: float) -> float:
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def action_id(a: int) -> str:
    return f"act_{a}"


class SynthDomain:
    domain_id = "synth"
    objective_sense = "maximize"

    def __init__(self, spec: SynthSpec):
        self.spec = spec
        self.metric_names = tuple(signal_name(k) for k in range(spec.n_causes))
        self.metric_goals = {name: "decrease" for name in self.metric_names}
        self.benchmark = f"rho={spec.observability_rho:g}"
        self.state: SynthState | None = None
        self._rng = np.random.default_rng(0)

    def actions(self) -> list[ActionSpec]:
        return [
            ActionSpec(
                id=action_id(a),
                category=f"cause_{addressed_cause(a, self.spec.n_causes)}",
                label=f"intervention {a} (addresses cause {addressed_cause(a, self.spec.n_causes)})",
                payload={"index": a, "addresses": addressed_cause(a, self.spec.n_causes)},
            )
            for a in range(self.spec.n_actions)
        ]

    def reset(self, seed: int) -> MetricSnapshot:
        self._rng = np.random.default_rng(seed)
        cause = int(self._rng.integers(self.spec.n_causes))
        self.state = SynthState(true_cause=cause)
        return observe(self.state, self.spec, self._rng)

    def step(self, action: ActionSpec, decision: AgentDecision) -> MetricSnapshot:
        if self.state is None:
            raise RuntimeError("reset() must be called first")
        self.state = apply(self.state, int(action.payload["index"]), self.spec)
        return observe(self.state, self.spec, self._rng)
