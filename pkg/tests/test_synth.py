from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import synth_trial
from metricloop.analysis import summarize
from metricloop.domains import synth
from metricloop.errors import ConfigError, UnknownAction


def _h2(p: float) -> float:
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def _symbol_frequency(rho: float, n_causes: int, draws: int, seed: int) -> np.ndarray:
    spec = synth.SynthSpec(n_causes=n_causes, observability_rho=rho)
    rng = np.random.default_rng(seed)
    counts = np.zeros((n_causes, n_causes))
    for i in range(draws):
        cause = i % n_causes
        counts[cause, synth.draw_symbol(synth.SynthState(cause), spec, rng)] += 1
    return counts


def test_noiseless_channel_reports_true_cause():
    counts = _symbol_frequency(1.0, 4, 400, seed=1)
    assert np.all(counts == np.diag(np.diag(counts)))


def test_uninformative_channel_is_uniform():
    spec = synth.SynthSpec(n_causes=4, observability_rho=0.25)
    assert np.allclose(spec.channel(), 0.25, atol=1e-15)


def test_rho_0_8_frequency():
    counts = _symbol_frequency(0.8, 4, 10_000, seed=2024)
    hit = np.trace(counts) / counts.sum()
    assert 0.78 <= hit <= 0.82


def test_observe_encodes_one_hot_indicators():
    spec = synth.SynthSpec(observability_rho=1.0)
    snap = synth.observe(synth.SynthState(2), spec, np.random.default_rng(0))
    assert {k: v.median for k, v in snap.metrics.items()} == {"signal_0": 0.0, "signal_1": 0.0,
                                                              "signal_2": 1.0, "signal_3": 0.0}
    assert snap.objective_value == 1.0


def test_apply_adds_effect_and_counts_steps():
    spec = synth.SynthSpec(seed=5)
    s = synth.SynthState(true_cause=1)
    for a in (1, 0, 5):
        nxt = synth.apply(s, a, spec)
        assert nxt.objective == s.objective + spec.effect_table[1, a]
        assert nxt.step == s.step + 1
        assert nxt.true_cause == 1
        s = nxt
    with pytest.raises(UnknownAction):
        synth.apply(s, spec.n_actions, spec)


def test_addressing_action_damps_signal():
    spec = synth.SynthSpec(seed=5)
    s = synth.apply(synth.SynthState(true_cause=1), 1, spec)
    assert s.intensity == 0.5
    assert synth.apply(s, 2, spec).intensity == 0.5


def test_true_gap_endpoints():
    assert synth.true_gap(synth.SynthSpec(n_causes=4, observability_rho=1.0)) == pytest.approx(0.0, abs=1e-12)
    assert synth.true_gap(synth.SynthSpec(n_causes=4, observability_rho=0.25)) == pytest.approx(1.0, abs=1e-12)


def test_true_gap_binary_oracle():
    g = synth.true_gap(synth.SynthSpec(n_causes=2, observability_rho=0.89))
    assert g == pytest.approx(1 - (1 - _h2(0.11)), abs=1e-12)
    assert abs(g - 0.50) <= 0.01


def test_true_gap_symmetric_channel_oracle():
    # n-ary symmetric channel: I = log n - H(rho, (1-rho)/(n-1) x (n-1))
    n, rho = 5, 0.6
    h_row = -rho * math.log2(rho) - (1 - rho) * math.log2((1 - rho) / (n - 1))
    expected = 1 - (math.log2(n) - h_row) / math.log2(n)
    assert synth.true_gap(synth.SynthSpec(n_causes=n, observability_rho=rho)) == pytest.approx(expected, abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 8), st.floats(0, 1), st.floats(0, 1))
def test_true_gap_monotone_in_rho(n, a, b):
    lo = 1.0 / n
    r1, r2 = sorted((lo + (1 - lo) * a, lo + (1 - lo) * b))
    g1 = synth.true_gap(synth.SynthSpec(n_causes=n, observability_rho=r1))
    g2 = synth.true_gap(synth.SynthSpec(n_causes=n, observability_rho=r2))
    assert g2 <= g1 + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 10), st.floats(0, 1))
def test_channel_rows_normalised(n, rho):
    ch = synth.SynthSpec(n_causes=n, observability_rho=rho).channel()
    assert np.all(np.abs(ch.sum(axis=1) - 1.0) <= 1e-12)


def test_spec_validation():
    with pytest.raises(ConfigError):
        synth.SynthSpec(n_causes=1)
    with pytest.raises(ConfigError):
        synth.SynthSpec(observability_rho=1.5)
    with pytest.raises(ConfigError):
        synth.SynthSpec(n_causes=2, n_actions=2, effect_table=np.array([[1.0, 1.0], [0.0, 1.0]]))
    with pytest.raises(ConfigError):
        synth.SynthSpec(n_causes=2, n_actions=2, effect_table=np.zeros((3, 2)))


def test_random_table_has_unique_best_fix():
    for seed in range(20):
        spec = synth.SynthSpec(n_causes=4, n_actions=8, seed=seed)
        for c in range(4):
            assert spec.best_action(c) == c


def test_effect_table_csv(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("cause,action,delta\n0,0,1.0\n0,1,-0.5\n1,0,0.1\n1,1,0.7\n")
    table = synth.load_effect_table(path, 2, 2)
    assert table.tolist() == [[1.0, -0.5], [0.1, 0.7]]
    path.write_text("cause,action,delta\n0,0,1.0\n")
    with pytest.raises(ConfigError):
        synth.load_effect_table(path, 2, 2)


def test_domain_reset_is_seeded():
    d = synth.SynthDomain(synth.SynthSpec(observability_rho=0.5))
    a = [d.reset(9).metrics for _ in range(2)]
    assert a[0] == a[1]


def test_sign_pattern_small():
    prior = summarize([synth_trial(seed=s, rho=0.25, kind="prior") for s in range(20)])
    corrupted = summarize([synth_trial(seed=s, rho=1.0, kind="signal", corruption=1.0) for s in range(20)])
    assert prior.gap_pp > 0
    assert corrupted.gap_pp < 0
