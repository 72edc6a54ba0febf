from __future__ import annotations

import csv
import json
import shutil
import subprocess
import sys

import pytest

from metricloop import cli
from metricloop.core.records import read_trial, serialize_trial


def run(*argv: str) -> int:
    return cli.main(list(argv))


def test_run_synth_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    common = ["run", "--domain", "synth", "--agent", "scripted:signal", "--trials", "5", "--seed", "7"]
    assert run(*common, "--out", str(a)) == 0
    assert run(*common, "--out", str(b)) == 0
    files = sorted(p.name for p in a.glob("*.jsonl"))
    assert len(files) == 5
    for name in files:
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert (a / "summary.csv").read_text() == (b / "summary.csv").read_text()
    rows = list(csv.DictReader((a / "summary.csv").open()))
    assert [int(r["seed"]) for r in rows] == [7, 8, 9, 10, 11]


def test_run_compiler_replay_offline(tmp_path, fixtures_dir):
    fixture = fixtures_dir / "jacobi_type_a.jsonl"
    code = run("run", "--domain", "compiler", "--agent", "replay", "--fixture", str(fixture), "--out", str(tmp_path))
    assert code == 0
    (out,) = tmp_path.glob("*.jsonl")
    assert out.read_bytes() == fixture.read_bytes()
    assert read_trial(out).iterations[0].paradox_class == "TypeA"


def test_missing_config_names_path(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert run("run", "--config", str(missing)) == cli.EXIT_USAGE
    assert str(missing) in capsys.readouterr().err


def test_missing_fixture_and_bad_usage(tmp_path, capsys):
    assert run("run", "--agent", "replay", "--fixture", str(tmp_path / "x.jsonl")) == cli.EXIT_USAGE
    with pytest.raises(SystemExit) as info:
        run("run", "--trials", "many")
    assert info.value.code == cli.EXIT_USAGE
    assert run("run", "--iterations", "0", "--out", str(tmp_path)) == cli.EXIT_USAGE


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({
        "domain": "synth", "agent": "scripted:prior", "trials": 2,
        "loop": {"n_iterations": 3, "history_window_k": 3, "noise_epsilon_rel": 0.01},
        "synth": {"n_causes": 3, "observability_rho": 0.5, "n_actions": 6, "seed": 2},
        "out": str(tmp_path / "from-config"),
    }))
    assert run("run", "--config", str(cfg), "--iterations", "4") == 0
    files = sorted((tmp_path / "from-config").glob("*.jsonl"))
    assert len(files) == 2
    t = read_trial(files[0])
    assert t.config.n_iterations == 4 and t.config.history_window_k == 3 and t.config.noise_epsilon_rel == 0.01
    assert t.agent_id == "scripted:prior" and t.benchmark == "rho=0.5"


def test_config_env_interpolation_only_in_llm_block(tmp_path, monkeypatch):
    monkeypatch.setenv("MY_ENDPOINT", "http://llm.example/v1")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"agent": "llm", "out": "${MY_ENDPOINT}",
                               "llm": {"endpoint": "${MY_ENDPOINT}", "model": "m"}}))
    loaded = cli.load_config(cfg)
    assert loaded.llm["endpoint"] == "http://llm.example/v1"
    assert str(loaded.out) == "${MY_ENDPOINT}"
    cfg.write_text(json.dumps({"llm": {"endpoint": "${UNSET_VAR_XYZ}", "model": "m"}}))
    with pytest.raises(cli.ConfigError):
        cli.load_config(cfg)


def test_agent_failure_exit_code(tmp_path):
    fixture = tmp_path / "short.jsonl"
    fixture.write_bytes(serialize_trial(read_trial(_synth_record(tmp_path))))
    code = run("run", "--domain", "synth", "--agent", "replay", "--fixture", str(fixture),
               "--iterations", "5", "--out", str(tmp_path / "out"))
    assert code == cli.EXIT_AGENT


def _synth_record(tmp_path):
    out = tmp_path / "src"
    assert run("run", "--iterations", "2", "--out", str(out)) == 0
    return next(out.glob("*.jsonl"))


def test_report_reproduces_fixture_bytes(tmp_path, fixtures_dir):
    demo = fixtures_dir / "demo"
    assert run("report", str(demo / "records" / "*.jsonl"), "--out", str(tmp_path)) == 0
    assert (tmp_path / "summary.md").read_bytes() == (demo / "expected" / "summary.md").read_bytes()
    assert (tmp_path / "summary.csv").read_bytes() == (demo / "expected" / "summary.csv").read_bytes()


def test_report_contents(tmp_path, fixtures_dir):
    text = (fixtures_dir / "demo" / "expected" / "summary.md").read_text()
    for needle in ("ActSR", "ASR", "Gap", "TypeA", "Mann-Whitney U", "Bootstrap 95% CI"):
        assert needle in text


def test_report_no_files(tmp_path):
    assert run("report", str(tmp_path / "*.jsonl")) == cli.EXIT_ANALYSIS


def test_report_corrupt_file(tmp_path):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"schema_version": 1, "kind": "trial"')
    assert run("report", str(bad)) == cli.EXIT_ANALYSIS


def test_ablate(tmp_path, capsys):
    assert run("ablate", "--domain", "synth", "--trials", "2", "--windows", "3", "5", "10", "--out", str(tmp_path)) == 0
    rows = list(csv.DictReader((tmp_path / "ablation.csv").open()))
    assert [r["window"] for r in rows] == ["3", "5", "10"]
    assert all(r["suffix_ok"] == "True" for r in rows)


def test_synth_sweep(tmp_path):
    assert run("synth-sweep", "--rhos", "0.25", "1.0", "--trials", "5", "--out", str(tmp_path)) == 0
    rows = list(csv.DictReader((tmp_path / "synth_sweep.csv").open()))
    assert [float(r["true_gap"]) for r in rows] == [1.0, 0.0]
    assert set(rows[0]) == {"rho", "true_gap", "gap_pp[scripted:prior]", "gap_pp[scripted:signal]"}


def test_synth_sweep_rejects_rho_below_uniform(tmp_path):
    assert run("synth-sweep", "--rhos", "0.1", "--out", str(tmp_path)) == cli.EXIT_USAGE


def test_atomic_outputs_leave_no_temp_files(tmp_path):
    assert run("run", "--trials", "2", "--iterations", "2", "--out", str(tmp_path)) == 0
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".")]


@pytest.mark.skipif(shutil.which("metricloop") is None, reason="console script not installed")
def test_console_script(tmp_path):
    proc = subprocess.run(["metricloop", "run", "--iterations", "1", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "metricloop.cli", "run", "--config", str(tmp_path / "x.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "x.json" in proc.stderr
