"""Command-line entry point: ``metricloop {run,report,ablate,synth-sweep}``."""

from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import logging
import os
import re
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from .agents import LlmAgent, LlmConfig, RandomAgent, RecordedDomain, ReplayAgent, make_scripted
from .analysis.report import summary_markdown, trials_csv
from .analysis.scoring import summarize
from .core.loop import build_context, run_trial
from .core.records import atomic_write, read_trial, read_trials, write_trial
from .core.types import LoopConfig, TrialRecord
from .domains import compiler, synth, train
from .errors import AgentFailure, AnalysisError, ConfigError, DomainFailure, HarnessError, ParseError

log = logging.getLogger("metricloop")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DOMAIN = 2
EXIT_AGENT = 3
EXIT_ANALYSIS = 4

_ENV_REF = re.compile(r"\$\{(\w+)\}")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class HarnessConfig:
    domain: str = "synth"
    agent: str = "scripted:signal"
    trials: int = 1
    loop: LoopConfig = field(default_factory=LoopConfig)
    out: Path = Path("runs")
    fixture: Path | None = None
    offline: bool = False
    synth: dict[str, Any] = field(default_factory=dict)
    train: dict[str, Any] = field(default_factory=dict)
    compiler: dict[str, Any] = field(default_factory=dict)
    llm: dict[str, Any] = field(default_factory=dict)
    corruption: float = 0.0


def _interpolate_secrets(block: dict[str, Any]) -> dict[str, Any]:
    out = {}
    for k, v in block.items():
        if isinstance(v, str):
            def sub(m):
                if m.group(1) not in os.environ:
                    raise ConfigError(f"environment variable {m.group(1)} referenced in llm config is not set")
                return os.environ[m.group(1)]
            v = _ENV_REF.sub(sub, v)
        out[k] = v
    return out


def load_config(path: str | Path | None) -> HarnessConfig:
    cfg = HarnessConfig()
    if path is None:
        return cfg
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    loop = data.get("loop", {})
    try:
        cfg.loop = LoopConfig(**loop)
    except TypeError as exc:
        raise ConfigError(f"{path}: bad loop block: {exc}") from None
    for key in ("domain", "agent", "trials", "corruption"):
        if key in data:
            setattr(cfg, key, data[key])
    if "out" in data:
        cfg.out = Path(data["out"])
    if "fixture" in data:
        cfg.fixture = Path(data["fixture"])
        if not cfg.fixture.is_file():
            raise ConfigError(f"fixture file not found: {cfg.fixture}")
    for block in ("synth", "train", "compiler"):
        cfg.__dict__[block] = dict(data.get(block, {}))
    cfg.llm = _interpolate_secrets(dict(data.get("llm", {})))
    for k in cfg.compiler.get("kernels", []):
        if isinstance(k, dict) and not Path(k["source_path"]).is_file():
            raise ConfigError(f"kernel source not found: {k['source_path']}")
    return cfg


def _apply_overrides(cfg: HarnessConfig, args: argparse.Namespace) -> HarnessConfig:
    loop = cfg.loop
    if args.iterations is not None:
        loop = replace(loop, n_iterations=args.iterations)
    if args.window is not None:
        loop = replace(loop, history_window_k=args.window)
    if args.seed is not None:
        loop = replace(loop, seed=args.seed)
    if args.eps is not None:
        loop = replace(loop, noise_epsilon_rel=args.eps)
    cfg.loop = loop.validate()
    for name in ("domain", "agent", "trials", "corruption"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if args.out is not None:
        cfg.out = Path(args.out)
    if args.fixture is not None:
        cfg.fixture = Path(args.fixture)
        if not cfg.fixture.is_file():
            raise ConfigError(f"fixture file not found: {cfg.fixture}")
    if getattr(args, "offline", False):
        cfg.offline = True
    if cfg.agent == "replay" and cfg.domain != "synth" and not getattr(args, "live", False):
        cfg.offline = True
    for key, attr in (("observability_rho", "rho"), ("n_causes", "n_causes"), ("n_actions", "n_actions")):
        value = getattr(args, attr, None)
        if value is not None:
            cfg.synth[key] = value
    if getattr(args, "kernel", None):
        cfg.compiler["kernels"] = list(args.kernel)
    if getattr(args, "reps", None) is not None:
        cfg.compiler["reps"] = args.reps
    if cfg.domain not in ("synth", "compiler", "train"):
        raise ConfigError(f"unknown domain {cfg.domain!r}")
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    return cfg


def synth_spec(block: dict[str, Any]) -> synth.SynthSpec:
    block = dict(block)
    table_csv = block.pop("effect_table_csv", None)
    spec = synth.SynthSpec(**{k: v for k, v in block.items() if k in ("n_causes", "observability_rho",
                                                                     "n_actions", "seed")})
    if table_csv:
        table = synth.load_effect_table(table_csv, spec.n_causes, spec.n_actions)
        spec = replace(spec, effect_table=table)
    return spec


def build_domains(cfg: HarnessConfig) -> list[Any]:
    """One domain instance per configured benchmark."""
    if cfg.domain == "synth":
        return [synth.SynthDomain(synth_spec(cfg.synth))]
    if cfg.domain == "train":
        block = dict(cfg.train)
        base = train.TrainConfig(**block.get("config", {}))
        return [train.TrainDomain(base, data_seed=block.get("data_seed", 1), mode=block.get("mode", "retrain"),
                                  n_train=block.get("n_train", 512), n_val=block.get("n_val", 256))]
    block = cfg.compiler
    bundled = compiler.bundled_kernels()
    kernels = []
    for k in block.get("kernels", ["jacobi-2d"]):
        if isinstance(k, str):
            if k not in bundled:
                raise ConfigError(f"unknown bundled kernel {k!r}; choose from {sorted(bundled)}")
            kernels.append(bundled[k])
        else:
            kernels.append(compiler.KernelSpec(name=k["name"], source_path=Path(k["source_path"]),
                                               loop_markers=tuple(k["loop_markers"]),
                                               build_flags=tuple(k.get("build_flags", ("-O2",)))))
    profiler = compiler.Profiler(block.get("profiler"))
    return [compiler.CompilerDomain(k, reps=block.get("reps", compiler.DEFAULT_REPS), cc=block.get("cc"),
                                    profiler=profiler) for k in kernels]


def build_agent(cfg: HarnessConfig, domain, seed: int):
    kind = cfg.agent
    if kind.startswith("scripted:"):
        return make_scripted(kind.split(":", 1)[1], domain, corruption=cfg.corruption, seed=seed)
    if kind == "random":
        return RandomAgent(seed)
    if kind == "replay":
        if cfg.fixture is None:
            raise ConfigError("--agent replay needs --fixture")
        return ReplayAgent.from_file(cfg.fixture)
    if kind == "llm":
        try:
            return LlmAgent(LlmConfig(**cfg.llm))
        except TypeError as exc:
            raise ConfigError(f"bad llm block: {exc}") from None
    raise ConfigError(f"unknown agent {kind!r}")


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", text)


def run_trials(cfg: HarnessConfig) -> list[TrialRecord]:
    """Run every configured (benchmark, trial) serially."""
    trials = []
    if cfg.offline:
        if cfg.fixture is None:
            raise ConfigError("--offline needs --fixture")
        recorded = read_trial(cfg.fixture)
        module = {"compiler": compiler, "train": train}.get(recorded.domain_id)
        if module is None:
            raise ConfigError(f"offline replay is not supported for domain {recorded.domain_id!r}")
        domain = RecordedDomain.for_domain(recorded, module)
        agent = ReplayAgent.from_trial(recorded)
        # the recorded loop config wins so the reproduction is exact
        return [run_trial(domain, agent, recorded.config)]
    for domain in build_domains(cfg):
        for i in range(cfg.trials):
            seed = cfg.loop.seed + i
            agent = build_agent(cfg, domain, seed)
            trials.append(run_trial(domain, agent, replace(cfg.loop, seed=seed)))
    return trials


def trial_filename(t: TrialRecord, index: int) -> str:
    return _slug(f"{t.domain_id}-{t.benchmark}-{t.agent_id}-seed{t.config.seed}-{index:03d}") + ".jsonl"


def write_outputs(trials: Sequence[TrialRecord], out: Path) -> list[Path]:
    paths = []
    for i, t in enumerate(trials):
        paths.append(write_trial(out / trial_filename(t, i), t))
    atomic_write(out / "summary.csv", trials_csv(trials))
    return paths


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--domain", choices=("synth", "compiler", "train"))
    p.add_argument("--agent", help="scripted:signal | scripted:prior | random | replay | llm")
    p.add_argument("--trials", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--window", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--out")
    p.add_argument("--fixture")
    p.add_argument("--offline", action="store_true", help="replay recorded measurements too "
                   "(default for --agent replay on compiler/train)")
    p.add_argument("--live", action="store_true", help="with --agent replay, measure the real domain")
    p.add_argument("--rho", type=float, help="synth observability")
    p.add_argument("--n-causes", type=int, dest="n_causes")
    p.add_argument("--n-actions", type=int, dest="n_actions")
    p.add_argument("--corruption", type=float, help="scripted-agent belief corruption (synth)")
    p.add_argument("--kernel", action="append", help="bundled kernel name (repeatable)")
    p.add_argument("--reps", type=int)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    trials = run_trials(cfg)
    paths = write_outputs(trials, cfg.out)
    for p in paths:
        print(p)
    s = summarize(trials)
    print(f"ActSR {s.actsr:.3f}  ASR {s.asr:.3f}  gap {s.gap_pp:+.1f}pp over {s.n_iterations} iterations")
    truncated = [t for t in trials if t.status != "complete"]
    if truncated:
        for t in truncated:
            print(f"error: trial {t.benchmark} seed {t.config.seed} truncated: {t.failure}", file=sys.stderr)
        return EXIT_AGENT
    return EXIT_OK


def _expand(patterns: Sequence[str]) -> list[Path]:
    files: list[Path] = []
    for pat in patterns:
        matches = sorted(glob.glob(pat)) or ([pat] if Path(pat).is_file() else [])
        files += [Path(m) for m in matches if Path(m).is_file() and m.endswith(".jsonl")]
    return files


def cmd_report(args: argparse.Namespace) -> int:
    files = _expand(args.records)
    if not files:
        print(f"error: no record files match {args.records}", file=sys.stderr)
        return EXIT_ANALYSIS
    trials = [t for f in files for t in read_trials(f)]
    md = summary_markdown(trials, bootstrap_b=args.bootstrap, seed=args.seed)
    out = Path(args.out) if args.out else None
    if out is not None:
        atomic_write(out / "summary.csv", trials_csv(trials))
        atomic_write(out / "summary.md", md)
    sys.stdout.write(md)
    return EXIT_OK


def suffix_relation_holds(trial: TrialRecord, windows: Sequence[int]) -> bool:
    """For every prefix of ``trial``, smaller windows give suffixes of larger ones."""
    ks = sorted(set(windows))
    for n in range(len(trial.iterations) + 1):
        prefix = replace(trial, iterations=trial.iterations[:n], status="complete", failure=None)
        ctx = {k: build_context(prefix, k).entries for k in ks}
        for k1, k2 in zip(ks, ks[1:]):
            small, big = ctx[k1], ctx[k2]
            if len(small) > len(big) or (small and big[-len(small):] != small):
                return False
    return True


def ablation_rows(cfg: HarnessConfig, windows: Sequence[int]) -> list[dict[str, Any]]:
    rows = []
    for k in windows:
        kcfg = replace(cfg, loop=replace(cfg.loop, history_window_k=k).validate())
        trials = run_trials(kcfg)
        s = summarize(trials)
        rows.append({
            "window": k,
            "trials": len(trials),
            "iterations": s.n_iterations,
            "actsr": f"{s.actsr:.4f}",
            "asr": f"{s.asr:.4f}",
            "gap_pp": f"{s.gap_pp:.2f}",
            "suffix_ok": all(suffix_relation_holds(t, windows) for t in trials),
        })
    return rows


def _csv(rows: Sequence[dict[str, Any]]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def cmd_ablate(args: argparse.Namespace) -> int:
    if not args.windows:
        raise ConfigError("--windows needs at least one value")
    cfg = _apply_overrides(load_config(args.config), args)
    rows = ablation_rows(cfg, args.windows)
    text = _csv(rows)
    atomic_write(cfg.out / "ablation.csv", text)
    sys.stdout.write(text)
    return EXIT_OK if all(r["suffix_ok"] for r in rows) else EXIT_ANALYSIS


def synth_sweep_rows(base: synth.SynthSpec, rhos: Sequence[float], agents: Sequence[str], trials: int,
                     loop: LoopConfig, corruption: float = 0.0) -> list[dict[str, Any]]:
    lo = 1.0 / base.n_causes
    for rho in rhos:
        if not lo - 1e-12 <= rho <= 1.0:
            raise ConfigError(f"rho {rho} outside [1/n_causes, 1] = [{lo:g}, 1]")
    rows = []
    for rho in rhos:
        spec = base.with_rho(rho)
        row: dict[str, Any] = {"rho": f"{rho:g}", "true_gap": f"{synth.true_gap(spec):.6f}"}
        for name in agents:
            cfg = HarnessConfig(domain="synth", agent=name, trials=trials, loop=loop, corruption=corruption)
            results = []
            for i in range(trials):
                domain = synth.SynthDomain(spec)
                seed = loop.seed + i
                results.append(run_trial(domain, build_agent(cfg, domain, seed), replace(loop, seed=seed)))
            row[f"gap_pp[{name}]"] = f"{summarize(results).gap_pp:.2f}"
        rows.append(row)
    return rows


def cmd_synth_sweep(args: argparse.Namespace) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    spec = synth_spec(cfg.synth)
    rows = synth_sweep_rows(spec, args.rhos, args.agents, cfg.trials, cfg.loop, cfg.corruption)
    text = _csv(rows)
    atomic_write(cfg.out / "synth_sweep.csv", text)
    sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="metricloop", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="run trials and write record files")
    _add_run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="summarise record files")
    p.add_argument("records", nargs="+", help="record files or glob patterns")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0, help="bootstrap seed")
    p.add_argument("--bootstrap", type=int, default=10_000, help="bootstrap replicates")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("ablate", help="history-window ablation")
    _add_run_flags(p)
    p.add_argument("--windows", type=int, nargs="+", default=[3, 5, 10])
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("synth-sweep", help="gap vs observability on the synthetic domain")
    _add_run_flags(p)
    p.add_argument("--rhos", type=float, nargs="+", required=True)
    p.add_argument("--agents", nargs="+", default=["scripted:prior", "scripted:signal"])
    p.set_defaults(func=cmd_synth_sweep)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainFailure as exc:
        print(f"error: domain: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except AgentFailure as exc:
        print(f"error: agent: {exc}", file=sys.stderr)
        return EXIT_AGENT
    except (AnalysisError, ParseError) as exc:
        print(f"error: analysis: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except HarnessError as exc:
        print(f"error: {type(exc).__module__}.{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
