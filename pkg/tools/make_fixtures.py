"""Regenerate the record fixtures bundled under ``src/metricloop/fixtures``.

    python tools/make_fixtures.py

The jacobi trace is hand-written (illustrative wall times, counter values as
listed below). The demo set is produced by running scripted agents on the
synthetic and training domains, then the expected report is rendered from it.
"""

from __future__ import annotations

from dataclasses import replace
from pathlib import Path

from metricloop.agents import make_scripted
from metricloop.agents.base import render_decision
from metricloop.analysis.report import summary_markdown, trials_csv
from metricloop.core import (AgentDecision, Hypothesis, LoopConfig, MetricSnapshot, MetricSummary, TrialRecord,
                             run_trial, write_trial)
from metricloop.core.loop import score_step
from metricloop.domains import synth, train

FIXTURES = Path(__file__).resolve().parents[1] / "src" / "metricloop" / "fixtures"


def _snap(wall: float, ipc: float, l1d: float, br: float, objective: float, clock: float) -> MetricSnapshot:
    return MetricSnapshot(
        metrics={
            "wall_time_s": MetricSummary(mean=wall, median=wall, std=wall * 0.002, n_reps=20),
            "ipc": MetricSummary(mean=ipc, median=ipc, std=0.01, n_reps=20),
            "l1d_miss_rate": MetricSummary(mean=l1d, median=l1d, std=0.0004, n_reps=20),
            "branch_miss_rate": MetricSummary(mean=br, median=br, std=0.0001, n_reps=20),
        },
        objective_value=objective,
        captured_at=clock,
        notes={"checksum": "illustrative"},
    )


def jacobi_type_a() -> TrialRecord:
    pre = _snap(0.012154, 1.71, 0.2217, 0.0091, 1.0, 0.0)
    post = _snap(0.012002, 1.74, 0.2218, 0.0090, 1.0127, 1.0)
    hyp = Hypothesis(mechanism="strided neighbour loads miss in L1; vectorizing the stencil sweep "
                               "should turn them into contiguous vector loads",
                     target_metric="l1d_miss_rate", predicted_direction="decrease")
    raw = render_decision(hyp, "vectorize_enable", "L1 misses dominate the stencil", marker="L0")
    decision = AgentDecision(hyp, "vectorize_enable", "L1 misses dominate the stencil", raw, marker="L0")
    config = LoopConfig(n_iterations=1, seed=0, objective_sense="maximize")
    it = score_step(0, pre, decision, post, "maximize", config.noise_epsilon_rel)
    return TrialRecord("compiler", "replay", config, (it,), pre, benchmark="jacobi-2d")


def demo_trials() -> list[TrialRecord]:
    trials = []
    loop = LoopConfig(n_iterations=5, seed=0)
    spec = synth.SynthSpec(n_causes=4, observability_rho=0.25, seed=3)
    for seed in range(6):
        domain = synth.SynthDomain(spec)
        trials.append(run_trial(domain, make_scripted("prior", domain, seed=seed), replace(loop, seed=seed)))
    for seed in range(6):
        domain = train.TrainDomain(train.TrainConfig(epochs_per_iteration=4), data_seed=seed + 1,
                                   n_train=256, n_val=128)
        agent = make_scripted("signal", domain, seed=seed)
        trials.append(run_trial(domain, agent, replace(loop, seed=seed)))
    return trials


def main() -> None:
    write_trial(FIXTURES / "jacobi_type_a.jsonl", jacobi_type_a())
    records = FIXTURES / "demo" / "records"
    for old in records.glob("*.jsonl"):
        old.unlink()
    trials = demo_trials()
    for i, t in enumerate(trials):
        write_trial(records / f"{t.domain_id}-{i:02d}.jsonl", t)
    expected = FIXTURES / "demo" / "expected"
    expected.mkdir(parents=True, exist_ok=True)
    (expected / "summary.csv").write_text(trials_csv(trials))
    (expected / "summary.md").write_text(summary_markdown(trials))


if __name__ == "__main__":
    main()
