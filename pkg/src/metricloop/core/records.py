"""JSON-lines encoding of trial records.

A trial is written as one ``trial`` header line, one ``iteration`` line per loop
step and an ``end`` line. Every line carries ``schema_version``. The end line
lets a reader tell a complete file from a truncated one.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterator

from ..errors import ParseError
from .types import (
    ActionSpec,
    AgentDecision,
    Hypothesis,
    IterationRecord,
    LoopConfig,
    MetricSnapshot,
    MetricSummary,
    TrialRecord,
)

SCHEMA_VERSION = 1


def _dumps(obj: dict[str, Any]) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False, ensure_ascii=False)


def snapshot_to_dict(s: MetricSnapshot) -> dict[str, Any]:
    return {
        "metrics": {
            name: {"mean": m.mean, "median": m.median, "std": m.std, "n_reps": m.n_reps}
            for name, m in s.metrics.items()
        },
        "objective_value": s.objective_value,
        "captured_at": s.captured_at,
        "notes": dict(s.notes),
    }


def snapshot_from_dict(d: dict[str, Any]) -> MetricSnapshot:
    return MetricSnapshot(
        metrics={
            name: MetricSummary(mean=float(m["mean"]), median=float(m["median"]),
                                std=float(m["std"]), n_reps=int(m["n_reps"]))
            for name, m in d["metrics"].items()
        },
        objective_value=float(d["objective_value"]),
        captured_at=float(d["captured_at"]),
        notes={str(k): str(v) for k, v in d.get("notes", {}).items()},
    )


def decision_to_dict(d: AgentDecision) -> dict[str, Any]:
    return {
        "hypothesis": {
            "mechanism": d.hypothesis.mechanism,
            "target_metric": d.hypothesis.target_metric,
            "predicted_direction": d.hypothesis.predicted_direction,
        },
        "action_id": d.action_id,
        "rationale": d.rationale,
        "raw_output": d.raw_output,
        "marker": d.marker,
    }


def decision_from_dict(d: dict[str, Any]) -> AgentDecision:
    h = d["hypothesis"]
    return AgentDecision(
        hypothesis=Hypothesis(h["mechanism"], h["target_metric"], h["predicted_direction"]),
        action_id=d["action_id"],
        rationale=d["rationale"],
        raw_output=d["raw_output"],
        marker=d.get("marker"),
    )


def config_to_dict(c: LoopConfig) -> dict[str, Any]:
    return {
        "n_iterations": c.n_iterations,
        "history_window_k": c.history_window_k,
        "noise_epsilon_rel": c.noise_epsilon_rel,
        "seed": c.seed,
        "objective_sense": c.objective_sense,
        "baseline_visible": c.baseline_visible,
    }


def config_from_dict(d: dict[str, Any]) -> LoopConfig:
    return LoopConfig(
        n_iterations=int(d["n_iterations"]),
        history_window_k=int(d["history_window_k"]),
        noise_epsilon_rel=float(d["noise_epsilon_rel"]),
        seed=int(d["seed"]),
        objective_sense=d.get("objective_sense"),
        baseline_visible=bool(d.get("baseline_visible", True)),
    )


def iteration_to_dict(it: IterationRecord) -> dict[str, Any]:
    return {
        "index": it.index,
        "pre": snapshot_to_dict(it.pre),
        "decision": decision_to_dict(it.decision),
        "post": snapshot_to_dict(it.post),
        "objective_delta": it.objective_delta,
        "action_success": it.action_success,
        "abductive_success": it.abductive_success,
        "paradox_class": it.paradox_class,
        "flags": list(it.flags),
    }


def iteration_from_dict(d: dict[str, Any]) -> IterationRecord:
    return IterationRecord(
        index=int(d["index"]),
        pre=snapshot_from_dict(d["pre"]),
        decision=decision_from_dict(d["decision"]),
        post=snapshot_from_dict(d["post"]),
        objective_delta=float(d["objective_delta"]),
        action_success=bool(d["action_success"]),
        abductive_success=bool(d["abductive_success"]),
        paradox_class=d["paradox_class"],
        flags=tuple(d.get("flags", ())),
    )


def action_to_dict(a: ActionSpec) -> dict[str, Any]:
    return {"id": a.id, "category": a.category, "label": a.label, "payload": dict(a.payload)}


def serialize_trial(trial: TrialRecord) -> bytes:
    lines = [
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "trial",
            "domain_id": trial.domain_id,
            "agent_id": trial.agent_id,
            "benchmark": trial.benchmark,
            "config": config_to_dict(trial.config),
            "baseline": snapshot_to_dict(trial.baseline),
        }
    ]
    for it in trial.iterations:
        lines.append({"schema_version": SCHEMA_VERSION, "kind": "iteration", **iteration_to_dict(it)})
    lines.append({
        "schema_version": SCHEMA_VERSION,
        "kind": "end",
        "n_iterations": len(trial.iterations),
        "status": trial.status,
        "failure": trial.failure,
    })
    try:
        return "".join(_dumps(line) + "\n" for line in lines).encode("utf-8")
    except ValueError as exc:  # NaN / inf
        raise ValueError(f"trial contains a non-finite value: {exc}") from None


def _iter_lines(data: bytes) -> Iterator[tuple[int, int, bytes]]:
    offset = 0
    for number, raw in enumerate(data.splitlines(keepends=True), start=1):
        yield number, offset, raw
        offset += len(raw)


def _parse_many(data: bytes) -> Iterator[TrialRecord]:
    header: dict[str, Any] | None = None
    iterations: list[IterationRecord] = []
    last_line, last_offset = 0, 0
    for number, offset, raw in _iter_lines(data):
        last_line, last_offset = number, offset
        if not raw.strip():
            continue
        if not raw.endswith(b"\n"):
            raise ParseError("line is not newline-terminated (truncated file?)", line=number, offset=offset)
        try:
            obj = json.loads(raw.decode("utf-8"), parse_constant=_reject_constant)
        except (UnicodeDecodeError, json.JSONDecodeError, ValueError) as exc:
            raise ParseError(f"malformed JSON: {exc}", line=number, offset=offset) from None
        if not isinstance(obj, dict):
            raise ParseError("expected a JSON object", line=number, offset=offset)
        if obj.get("schema_version") != SCHEMA_VERSION:
            raise ParseError(f"unsupported schema_version {obj.get('schema_version')!r}", line=number, offset=offset)
        kind = obj.get("kind")
        try:
            if kind == "trial":
                if header is not None:
                    raise ParseError("trial header before previous trial ended", line=number, offset=offset)
                header = obj
                iterations = []
            elif kind == "iteration":
                if header is None:
                    raise ParseError("iteration line outside a trial", line=number, offset=offset)
                iterations.append(iteration_from_dict(obj))
            elif kind == "end":
                if header is None:
                    raise ParseError("end line outside a trial", line=number, offset=offset)
                if obj.get("n_iterations") != len(iterations):
                    raise ParseError(
                        f"end line declares {obj.get('n_iterations')} iterations, found {len(iterations)}",
                        line=number, offset=offset,
                    )
                yield TrialRecord(
                    domain_id=header["domain_id"],
                    agent_id=header["agent_id"],
                    config=config_from_dict(header["config"]),
                    iterations=tuple(iterations),
                    baseline=snapshot_from_dict(header["baseline"]),
                    benchmark=header.get("benchmark", ""),
                    status=obj.get("status", "complete"),
                    failure=obj.get("failure"),
                )
                header = None
            else:
                raise ParseError(f"unknown line kind {kind!r}", line=number, offset=offset)
        except ParseError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"invalid {kind} record: {exc!r}", line=number, offset=offset) from None
    if header is not None:
        raise ParseError("trial has no end line (truncated file?)", line=last_line, offset=last_offset)


def _reject_constant(name: str) -> float:
    raise ValueError(f"non-finite constant {name} not allowed")


def deserialize_trial(data: bytes) -> TrialRecord:
    trials = list(_parse_many(data))
    if len(trials) != 1:
        raise ParseError(f"expected exactly one trial, found {len(trials)}")
    return trials[0]


def deserialize_trials(data: bytes) -> list[TrialRecord]:
    return list(_parse_many(data))


def atomic_write(path: str | os.PathLike, data: bytes | str) -> Path:
    """Write via a temp file in the same directory and rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_trial(path: str | os.PathLike, trial: TrialRecord) -> Path:
    return atomic_write(path, serialize_trial(trial))


def read_trial(path: str | os.PathLike) -> TrialRecord:
    return deserialize_trial(Path(path).read_bytes())


def read_trials(path: str | os.PathLike) -> list[TrialRecord]:
    return deserialize_trials(Path(path).read_bytes())


def is_finite_record(trial: TrialRecord) -> bool:
    def ok(s: MetricSnapshot) -> bool:
        vals = [s.objective_value, s.captured_at]
        for m in s.metrics.values():
            vals += [m.mean, m.median, m.std]
        return all(math.isfinite(v) for v in vals)

    return ok(trial.baseline) and all(ok(it.pre) and ok(it.post) and math.isfinite(it.objective_delta)
                                      for it in trial.iterations)
