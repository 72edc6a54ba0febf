"""Low-observability domain: loop pragmas on small C kernels.

Kernels mark optimisable loops with a trailing ``/* @loop <ID> */`` comment on
the loop header line, and optionally a prefetch site inside the loop body with
``/* @load <ID> <address expr using $D> */``. Pragmas are stacked directly above
the loop header; prefetch calls go on the line after the load marker.
"""

from __future__ import annotations

import logging
import os
import re
import shutil
import subprocess
import tempfile
import time
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from ..core.types import ActionSpec, AgentDecision, MetricSnapshot, MetricSummary
from ..errors import CompileError, ConfigError, MarkerNotFound, ProfilerUnavailable, RunError

log = logging.getLogger(__name__)

DEFAULT_CC = "clang"
DEFAULT_PROFILER = "perf"
DEFAULT_REPS = 20
CC_ENV = "METRICLOOP_CC"
PROFILER_ENV = "METRICLOOP_PROFILER"

PERF_EVENTS = (
    "instructions",
    "cycles",
    "L1-dcache-loads",
    "L1-dcache-load-misses",
    "branches",
    "branch-misses",
)
COUNTER_METRICS = ("ipc", "l1d_miss_rate", "branch_miss_rate")
METRIC_NAMES = ("wall_time_s", *COUNTER_METRICS)
METRIC_GOALS = {
    "wall_time_s": "decrease",
    "ipc": "increase",
    "l1d_miss_rate": "decrease",
    "branch_miss_rate": "decrease",
}

PRAGMA_KINDS = ("unroll", "vectorize", "interleave", "prefetch")

_LOOP_MARK = re.compile(r"/\*\s*@loop\s+(\w+)\s*\*/")
_LOAD_MARK = re.compile(r"/\*\s*@load\s+(\w+)\s+(.+?)\s*\*/")
_PRAGMA_LINE = re.compile(r"^\s*#pragma clang loop (\w+)\((\w+)\)\s*$")
_PREFETCH_LINE = re.compile(r"^\s*__builtin_prefetch\(")

# pragma clause name -> action kind
_CLAUSE_KIND = {
    "unroll_count": "unroll",
    "vectorize": "vectorize",
    "vectorize_width": "vectorize",
    "interleave": "interleave",
    "interleave_count": "interleave",
}


class ConflictingPragma(UserWarning):
    """An injection replaced a pragma of the same kind with a different parameter."""


@dataclass(frozen=True)
class PragmaAction:
    kind: str
    parameter: int | str  # "enable" or a small positive integer
    clause: str = ""

    @property
    def action_id(self) -> str:
        if self.kind == "prefetch":
            return f"prefetch_{self.parameter}"
        if self.parameter == "enable":
            return f"{self.kind}_enable"
        return f"{self.clause}_{self.parameter}"

    def pragma(self) -> str:
        return f"#pragma clang loop {self.clause}({self.parameter})"


ROSTER: tuple[PragmaAction, ...] = (
    PragmaAction("unroll", 2, "unroll_count"),
    PragmaAction("unroll", 4, "unroll_count"),
    PragmaAction("unroll", 8, "unroll_count"),
    PragmaAction("vectorize", "enable", "vectorize"),
    PragmaAction("vectorize", 4, "vectorize_width"),
    PragmaAction("vectorize", 8, "vectorize_width"),
    PragmaAction("interleave", "enable", "interleave"),
    PragmaAction("interleave", 2, "interleave_count"),
    PragmaAction("interleave", 4, "interleave_count"),
    PragmaAction("prefetch", 8),
    PragmaAction("prefetch", 16),
    PragmaAction("prefetch", 64),
)


def list_actions() -> list[ActionSpec]:
    out = []
    for p in ROSTER:
        label = f"prefetch distance {p.parameter}" if p.kind == "prefetch" else p.pragma()
        out.append(ActionSpec(id=p.action_id, category=p.kind, label=label,
                              payload={"kind": p.kind, "parameter": p.parameter, "clause": p.clause}))
    return out


def pragma_from_payload(payload: Mapping) -> PragmaAction:
    return PragmaAction(payload["kind"], payload["parameter"], payload.get("clause", ""))


@dataclass(frozen=True)
class KernelSpec:
    name: str
    source_path: Path
    loop_markers: tuple[str, ...]
    build_flags: tuple[str, ...] = ("-O2",)
    dataset_size: str = "default"

    def __post_init__(self) -> None:
        if not self.loop_markers:
            raise ConfigError(f"kernel {self.name}: at least one loop marker is required")
        source = Path(self.source_path).read_text()
        for marker in self.loop_markers:
            found = sum(1 for m in _LOOP_MARK.finditer(source) if m.group(1) == marker)
            if found != 1:
                raise ConfigError(f"kernel {self.name}: marker {marker} occurs {found} times, expected 1")

    def source(self) -> str:
        return Path(self.source_path).read_text()


def bundled_kernels() -> dict[str, KernelSpec]:
    root = resources.files("metricloop.domains") / "kernels"
    specs = {}
    for name, markers in (("jacobi-2d", ("L0", "L1")), ("gemm", ("L0", "L1")), ("atax", ("L0",))):
        path = Path(str(root / f"{name.replace('-', '')}.c"))
        specs[name] = KernelSpec(name=name, source_path=path, loop_markers=markers)
    return specs


def _find_loop(lines: list[str], marker: str) -> int:
    hits = [i for i, line in enumerate(lines) if any(m.group(1) == marker for m in _LOOP_MARK.finditer(line))]
    if not hits:
        raise MarkerNotFound(f"loop marker {marker!r} not found")
    return hits[0]


def inject_pragma(source: str, action: PragmaAction, marker: str) -> str:
    """Insert (or replace) ``action`` at loop ``marker``.

    Re-injecting the same kind at the same marker replaces the earlier line, so
    the operation is idempotent; a different parameter emits ConflictingPragma.
    """
    lines = source.split("\n")
    header = _find_loop(lines, marker)
    indent = re.match(r"\s*", lines[header]).group(0)

    if action.kind == "prefetch":
        site = None
        for i in range(header + 1, len(lines)):
            m = _LOAD_MARK.search(lines[i])
            if m and m.group(1) == marker:
                site = i
                break
        if site is None:
            raise MarkerNotFound(f"no load site marked for loop {marker!r}")
        expr = _LOAD_MARK.search(lines[site]).group(2).replace("$D", str(action.parameter))
        site_indent = re.match(r"\s*", lines[site]).group(0)
        new_line = f"{site_indent}__builtin_prefetch({expr});"
        nxt = site + 1
        if nxt < len(lines) and _PREFETCH_LINE.match(lines[nxt]):
            if lines[nxt] != new_line:
                warnings.warn(f"prefetch at {marker} replaced: {lines[nxt].strip()} -> {new_line.strip()}",
                              ConflictingPragma, stacklevel=2)
            lines[nxt] = new_line
        else:
            lines.insert(nxt, new_line)
        return "\n".join(lines)

    new_line = f"{indent}{action.pragma()}"
    # existing pragma block sits directly above the header
    top = header
    while top > 0 and _PRAGMA_LINE.match(lines[top - 1]):
        top -= 1
    for i in range(top, header):
        clause = _PRAGMA_LINE.match(lines[i]).group(1)
        if _CLAUSE_KIND.get(clause) == action.kind:
            if lines[i].strip() != new_line.strip():
                warnings.warn(f"{action.kind} pragma at {marker} replaced: {lines[i].strip()} -> {new_line.strip()}",
                              ConflictingPragma, stacklevel=2)
            del lines[i]
            header -= 1
            break
    lines.insert(header, new_line)
    return "\n".join(lines)


def resolve_tool(configured: str | None, env_var: str, default: str) -> str:
    return configured or os.environ.get(env_var) or default


def compile_kernel(kernel: KernelSpec, source: str, out_dir: str | Path, *, cc: str | None = None,
                   tag: str = "variant") -> tuple[Path, str]:
    """Compile ``source`` as ``<cc> <flags> -o <out> <src>``; returns (binary, stderr)."""
    cc = resolve_tool(cc, CC_ENV, DEFAULT_CC)
    if shutil.which(cc) is None:
        raise CompileError(f"compiler {cc!r} not found on PATH")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    src = out_dir / f"{kernel.name}-{tag}.c"
    src.write_text(source)
    binary = out_dir / f"{kernel.name}-{tag}"
    cmd = [cc, *kernel.build_flags, "-o", str(binary), str(src)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise CompileError(f"{' '.join(cmd)} exited with {proc.returncode}", proc.stderr)
    if proc.stderr:
        log.debug("compiler diagnostics for %s:\n%s", kernel.name, proc.stderr)
    return binary, proc.stderr


def _event_name(raw: str) -> str:
    name = raw.strip()
    m = re.match(r"^[\w-]+/(.+?)/\w*$", name)  # e.g. cpu_core/instructions/u
    if m:
        name = m.group(1)
    return name.split(":")[0]


def parse_perf_csv(text: str) -> dict[str, float]:
    """Counter values by event name from ``perf stat -x,`` output; unsupported events are skipped."""
    counts: dict[str, float] = {}
    for line in text.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split(",")
        if len(fields) < 3:
            continue
        value, event = fields[0].strip(), _event_name(fields[2])
        try:
            counts[event] = counts.get(event, 0.0) + float(value)
        except ValueError:
            continue  # <not supported> / <not counted>
    return counts


@dataclass(frozen=True)
class CounterSet:
    wall_time_s: float
    ipc: float | None = None
    l1d_miss_rate: float | None = None
    branch_miss_rate: float | None = None

    def __post_init__(self) -> None:
        if not self.wall_time_s > 0:
            raise ValueError("wall_time_s must be positive")
        for name in ("l1d_miss_rate", "branch_miss_rate"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


def _ratio(num: float | None, den: float | None) -> float | None:
    if num is None or not den:
        return None
    return num / den


def counters_from_events(wall_time_s: float, events: Mapping[str, float]) -> CounterSet:
    miss = _ratio(events.get("L1-dcache-load-misses"), events.get("L1-dcache-loads"))
    branch = _ratio(events.get("branch-misses"), events.get("branches"))
    return CounterSet(
        wall_time_s=wall_time_s,
        ipc=_ratio(events.get("instructions"), events.get("cycles")),
        l1d_miss_rate=None if miss is None else min(miss, 1.0),
        branch_miss_rate=None if branch is None else min(branch, 1.0),
    )


def _parse_program_output(stdout: str) -> dict[str, str]:
    out = {}
    for line in stdout.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


@dataclass
class Profiler:
    """``<profiler> stat -x, -e <events> -- <binary>``, or plain execution when unavailable."""

    tool: str | None = None
    events: Sequence[str] = PERF_EVENTS
    available: bool | None = None
    reason: str = ""

    def __post_init__(self) -> None:
        self.tool = resolve_tool(self.tool, PROFILER_ENV, DEFAULT_PROFILER)

    def probe(self) -> bool:
        if self.available is not None:
            return self.available
        try:
            if shutil.which(self.tool) is None:
                raise ProfilerUnavailable(f"{self.tool!r} not found on PATH")
            proc = subprocess.run([self.tool, "stat", "-x,", "-e", ",".join(self.events), "--", "true"],
                                  capture_output=True, text=True, timeout=30)
            counts = parse_perf_csv(proc.stderr)
            if proc.returncode != 0 or not {"instructions", "cycles"} <= counts.keys():
                raise ProfilerUnavailable(f"{self.tool} stat gave no usable counters: {proc.stderr.strip()[:200]}")
            self.available = True
        except (ProfilerUnavailable, OSError, subprocess.SubprocessError) as exc:
            self.available, self.reason = False, str(exc)
            log.warning("hardware counters unavailable, measuring wall time only: %s", exc)
        return self.available

    def run(self, binary: Path) -> tuple[dict[str, str], dict[str, float], float]:
        """Execute once; returns (program key=value output, counter values, external wall time)."""
        if self.probe():
            cmd = [self.tool, "stat", "-x,", "-e", ",".join(self.events), "--", str(binary)]
        else:
            cmd = [str(binary)]
        start = time.perf_counter()
        proc = subprocess.run(cmd, capture_output=True, text=True)
        elapsed = time.perf_counter() - start
        if proc.returncode != 0:
            raise RunError(f"{binary} exited with {proc.returncode}: {proc.stderr.strip()[:500]}")
        counts = parse_perf_csv(proc.stderr) if self.available else {}
        return _parse_program_output(proc.stdout), counts, elapsed


def measure(binary: Path, reps: int = DEFAULT_REPS, *, profiler: Profiler | None = None,
            baseline_median_time: float | None = None) -> MetricSnapshot:
    """Run ``binary`` ``reps`` times serially and summarise time and counters.

    The objective is speedup against ``baseline_median_time`` (1.0 when omitted,
    i.e. for the baseline itself).
    """
    if reps < 1:
        raise ValueError("reps must be positive")
    profiler = profiler or Profiler()
    samples: dict[str, list[float]] = {name: [] for name in METRIC_NAMES}
    checksums = set()
    for _ in range(reps):
        output, counts, elapsed = profiler.run(binary)
        wall = float(output["time"]) if "time" in output else elapsed
        if wall <= 0:
            wall = elapsed
        cs = counters_from_events(wall, counts)
        for name in METRIC_NAMES:
            v = getattr(cs, name)
            if v is not None:
                samples[name].append(v)
        checksums.add(output.get("checksum", ""))
    if len(checksums) != 1:
        raise RunError(f"nondeterministic program output across repetitions: {sorted(checksums)}")
    metrics = {name: MetricSummary.from_samples(v) for name, v in samples.items() if len(v) == reps}
    median = metrics["wall_time_s"].median
    notes = {"checksum": checksums.pop()}
    if not profiler.available:
        notes["profiler"] = f"unavailable: {profiler.reason}"[:300]
    return MetricSnapshot(
        metrics=metrics,
        objective_value=1.0 if baseline_median_time is None else baseline_median_time / median,
        captured_at=time.monotonic(),
        notes=notes,
    )


class CompilerDomain:
    domain_id = "compiler"
    objective_sense = "maximize"
    metric_names = METRIC_NAMES
    metric_goals = METRIC_GOALS

    def __init__(self, kernel: KernelSpec, *, reps: int = DEFAULT_REPS, cc: str | None = None,
                 profiler: Profiler | None = None, workdir: str | Path | None = None):
        self.kernel = kernel
        self.benchmark = kernel.name
        self.reps = reps
        self.cc = cc
        self.profiler = profiler or Profiler()
        self._workdir = Path(workdir) if workdir else Path(tempfile.mkdtemp(prefix="metricloop-"))
        self.source = kernel.source()
        self.baseline_time: float | None = None
        self.baseline_checksum: str | None = None
        self.log: list[str] = []
        self._n = 0

    def actions(self) -> list[ActionSpec]:
        return list_actions()

    def reset(self, seed: int) -> MetricSnapshot:
        self.source = self.kernel.source()
        binary, diag = compile_kernel(self.kernel, self.source, self._workdir, cc=self.cc, tag="baseline")
        self.log.append(diag)
        snap = measure(binary, self.reps, profiler=self.profiler)
        self.baseline_time = snap.metrics["wall_time_s"].median
        self.baseline_checksum = snap.notes["checksum"]
        return snap

    def step(self, action: ActionSpec, decision: AgentDecision) -> MetricSnapshot:
        marker = decision.marker or self.kernel.loop_markers[0]
        if marker not in self.kernel.loop_markers:
            raise MarkerNotFound(f"kernel {self.kernel.name} has no loop marker {marker!r}")
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConflictingPragma)
            candidate = inject_pragma(self.source, pragma_from_payload(action.payload), marker)
        self.log.extend(str(w.message) for w in caught)
        self._n += 1
        binary, diag = compile_kernel(self.kernel, candidate, self._workdir, cc=self.cc, tag=f"it{self._n}")
        self.log.append(diag)
        snap = measure(binary, self.reps, profiler=self.profiler, baseline_median_time=self.baseline_time)
        if snap.notes.get("checksum") != self.baseline_checksum:
            raise RunError(f"{action.id} at {marker} changed program output "
                           f"({self.baseline_checksum} -> {snap.notes.get('checksum')})")
        self.source = candidate
        return snap
