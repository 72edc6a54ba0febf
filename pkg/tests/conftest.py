from __future__ import annotations

from importlib import resources
from pathlib import Path

import pytest

from metricloop.core import LoopConfig, run_trial
from metricloop.domains import synth
from metricloop.agents import make_scripted


FIXTURES = Path(str(resources.files("metricloop") / "fixtures"))


def synth_trial(seed: int = 7, n: int = 10, rho: float = 1.0, kind: str = "signal", corruption: float = 0.0,
                **loop):
    domain = synth.SynthDomain(synth.SynthSpec(observability_rho=rho, seed=3))
    agent = make_scripted(kind, domain, corruption=corruption, seed=seed)
    return run_trial(domain, agent, LoopConfig(n_iterations=n, seed=seed, **loop))


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
