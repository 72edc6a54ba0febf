"""Record types exchanged between domains, agents, the loop and the scorers."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field, replace
from typing import Any, Literal, Mapping, Protocol, Sequence, runtime_checkable

from ..errors import ConfigError

Direction = Literal["increase", "decrease"]
ObjectiveSense = Literal["maximize", "minimize"]

DIRECTIONS: tuple[str, ...] = ("increase", "decrease")
SENSES: tuple[str, ...] = ("maximize", "minimize")

TYPE_A = "TypeA"
TYPE_B = "TypeB"
ALIGNED_SUCCESS = "AlignedSuccess"
ALIGNED_FAILURE = "AlignedFailure"
PARADOX_CLASSES: tuple[str, ...] = (TYPE_A, TYPE_B, ALIGNED_SUCCESS, ALIGNED_FAILURE)

MAX_SEED = 2**64 - 1


def paradox_class(action_success: bool, abductive_success: bool) -> str:
    if action_success and not abductive_success:
        return TYPE_A
    if abductive_success and not action_success:
        return TYPE_B
    return ALIGNED_SUCCESS if action_success else ALIGNED_FAILURE


@dataclass(frozen=True)
class MetricSummary:
    mean: float
    median: float
    std: float
    n_reps: int

    def __post_init__(self) -> None:
        if self.n_reps < 1:
            raise ValueError(f"n_reps must be >= 1, got {self.n_reps}")
        if not self.std >= 0:
            raise ValueError(f"std must be >= 0, got {self.std}")

    @classmethod
    def from_samples(cls, samples: Sequence[float]) -> MetricSummary:
        values = [float(v) for v in samples]
        if not values:
            raise ValueError("cannot summarize an empty sample")
        std = statistics.pstdev(values) if len(values) > 1 else 0.0
        return cls(
            mean=statistics.fmean(values),
            median=statistics.median(values),
            std=std,
            n_reps=len(values),
        )

    @classmethod
    def single(cls, value: float) -> MetricSummary:
        value = float(value)
        return cls(mean=value, median=value, std=0.0, n_reps=1)


@dataclass(frozen=True)
class MetricSnapshot:
    """Observed metrics at one loop step.

    ``captured_at`` is a monotonic reading supplied by the domain; deterministic
    domains use a logical clock so records stay reproducible. ``notes`` carries
    auxiliary domain facts (program checksum, profiler degradation, divergence).
    """

    metrics: Mapping[str, MetricSummary]
    objective_value: float
    captured_at: float
    notes: Mapping[str, str] = field(default_factory=dict)

    def median(self, name: str) -> float:
        return self.metrics[name].median


@dataclass(frozen=True)
class ActionSpec:
    id: str
    category: str
    label: str
    payload: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class Hypothesis:
    mechanism: str
    target_metric: str
    predicted_direction: str

    def __post_init__(self) -> None:
        if self.predicted_direction not in DIRECTIONS:
            raise ValueError(f"predicted_direction must be one of {DIRECTIONS}")


@dataclass(frozen=True)
class AgentDecision:
    hypothesis: Hypothesis
    action_id: str
    rationale: str
    raw_output: str
    # Optional placement inside the domain, e.g. a loop marker for pragmas.
    marker: str | None = None


@dataclass(frozen=True)
class IterationRecord:
    index: int
    pre: MetricSnapshot
    decision: AgentDecision
    post: MetricSnapshot
    objective_delta: float
    action_success: bool
    abductive_success: bool
    paradox_class: str
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        expected = paradox_class(self.action_success, self.abductive_success)
        if self.paradox_class != expected:
            raise ValueError(
                f"paradox_class {self.paradox_class!r} inconsistent with "
                f"({self.action_success}, {self.abductive_success}) -> {expected!r}"
            )


@dataclass(frozen=True)
class LoopConfig:
    n_iterations: int = 10
    history_window_k: int = 5
    noise_epsilon_rel: float = 0.005
    seed: int = 0
    # None means "use the domain's own sense"; resolved when a trial starts.
    objective_sense: str | None = None
    baseline_visible: bool = True

    def validate(self) -> LoopConfig:
        if not isinstance(self.n_iterations, int) or self.n_iterations < 1:
            raise ConfigError(f"n_iterations must be a positive integer, got {self.n_iterations!r}")
        if not isinstance(self.history_window_k, int) or self.history_window_k < 1:
            raise ConfigError(f"history_window_k must be >= 1, got {self.history_window_k!r}")
        if not 0.0 < self.noise_epsilon_rel < 1.0:
            raise ConfigError(f"noise_epsilon_rel must lie in (0, 1), got {self.noise_epsilon_rel!r}")
        if not isinstance(self.seed, int) or not 0 <= self.seed <= MAX_SEED:
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.objective_sense is not None and self.objective_sense not in SENSES:
            raise ConfigError(f"objective_sense must be one of {SENSES}, got {self.objective_sense!r}")
        return self

    def with_sense(self, sense: str) -> LoopConfig:
        if self.objective_sense is not None:
            return self
        return replace(self, objective_sense=sense)


@dataclass(frozen=True)
class TrialRecord:
    domain_id: str
    agent_id: str
    config: LoopConfig
    iterations: tuple[IterationRecord, ...]
    baseline: MetricSnapshot
    benchmark: str = ""
    status: str = "complete"  # "complete" | "truncated"
    failure: str | None = None

    def __post_init__(self) -> None:
        for expected, it in enumerate(self.iterations):
            if it.index != expected:
                raise ValueError(f"iteration indices must be contiguous from 0; got {it.index} at {expected}")
        if len(self.iterations) > self.config.n_iterations:
            raise ValueError("more iterations than config.n_iterations")


@dataclass(frozen=True)
class ContextWindow:
    """Recent history handed to the agent, oldest first."""

    entries: tuple[IterationRecord, ...]
    baseline: MetricSnapshot | None = None
    action_labels: Mapping[str, str] = field(default_factory=dict)

    def render(self) -> str:
        lines: list[str] = []
        if self.baseline is not None:
            parts = ", ".join(f"{k}={v.median:.6g}" for k, v in sorted(self.baseline.metrics.items()))
            lines.append(f"baseline: objective={self.baseline.objective_value:.6g}; {parts}")
        if not self.entries:
            lines.append("history: (none)")
        for it in self.entries:
            d = it.decision
            label = self.action_labels.get(d.action_id, d.action_id)
            deltas = []
            for name in sorted(it.post.metrics):
                if name in it.pre.metrics:
                    deltas.append(f"{name}{it.post.median(name) - it.pre.median(name):+.4g}")
            outcome = "improved" if it.action_success else "not improved"
            lines.append(
                f"[{it.index}] action={label} | hypothesis: {d.hypothesis.target_metric} "
                f"{d.hypothesis.predicted_direction} ({d.hypothesis.mechanism}) | "
                f"deltas: {', '.join(deltas) or 'n/a'} | objective {it.objective_delta:+.4g} {outcome}"
            )
        return "\n".join(lines)


@runtime_checkable
class Domain(Protocol):
    """What the loop needs from an environment.

    ``reset`` returns the baseline snapshot; ``step`` applies one intervention and
    returns the post-intervention snapshot, raising DomainFailure when it cannot.
    """

    domain_id: str
    objective_sense: str
    metric_names: tuple[str, ...]
    # desired direction per metric, used by scripted policies
    metric_goals: Mapping[str, str]

    def actions(self) -> list[ActionSpec]: ...

    def reset(self, seed: int) -> MetricSnapshot: ...

    def step(self, action: ActionSpec, decision: AgentDecision) -> MetricSnapshot: ...


@runtime_checkable
class Agent(Protocol):
    agent_id: str

    def decide(self, request: Any) -> AgentDecision: ...
