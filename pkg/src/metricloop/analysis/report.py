"""CSV and markdown reports over sets of trial records."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from typing import Sequence

from ..core.types import PARADOX_CLASSES, TrialRecord
from ..errors import EmptyInput
from .scoring import summarize, trial_rates
from .stats import bootstrap_ci, mann_whitney_u

TRIAL_COLUMNS = ("domain", "benchmark", "agent", "seed", "status", "n_iterations",
                 "actsr", "asr", "gap_pp", *PARADOX_CLASSES)


def trial_table(trials: Sequence[TrialRecord]) -> list[dict[str, object]]:
    rows = []
    for t in trials:
        rates = trial_rates(t) or (0.0, 0.0, 0.0)
        counts = {c: 0 for c in PARADOX_CLASSES}
        for it in t.iterations:
            counts[it.paradox_class] += 1
        rows.append({
            "domain": t.domain_id,
            "benchmark": t.benchmark,
            "agent": t.agent_id,
            "seed": t.config.seed,
            "status": t.status,
            "n_iterations": len(t.iterations),
            "actsr": f"{rates[0]:.4f}",
            "asr": f"{rates[1]:.4f}",
            "gap_pp": f"{rates[2]:.2f}",
            **counts,
        })
    return rows


def trials_csv(trials: Sequence[TrialRecord]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TRIAL_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(trial_table(trials))
    return buf.getvalue()


def group_by_domain(trials: Sequence[TrialRecord]) -> dict[str, list[TrialRecord]]:
    groups: dict[str, list[TrialRecord]] = defaultdict(list)
    for t in trials:
        groups[t.domain_id].append(t)
    return dict(sorted(groups.items()))


def per_trial_gaps(trials: Sequence[TrialRecord]) -> list[float]:
    return [r[2] for r in (trial_rates(t) for t in trials) if r is not None]


def _pct(x: float) -> str:
    return f"{100 * x:.1f}%"


def _pp(x: float) -> str:
    return f"{x:+.1f}pp"


def summary_markdown(trials: Sequence[TrialRecord], *, bootstrap_b: int = 10_000, seed: int = 0) -> str:
    """Paradox table per domain, plus the two-domain statistics block when applicable."""
    if not trials:
        raise EmptyInput("no trials to report")
    groups = group_by_domain(trials)
    summaries = {d: summarize(ts) for d, ts in groups.items()}
    names = list(groups)
    header = "| | " + " | ".join(names) + " |"
    sep = "|---|" + "---|" * len(names)
    rows = [
        ("Trials", lambda s: str(s.n_trials)),
        ("Iterations", lambda s: str(s.n_iterations)),
        ("ActSR", lambda s: _pct(s.actsr)),
        ("ASR", lambda s: _pct(s.asr)),
        ("Gap", lambda s: f"**{_pp(s.gap_pp)}**"),
        ("ActSR (per-trial mean)", lambda s: _pct(s.actsr_macro)),
        ("ASR (per-trial mean)", lambda s: _pct(s.asr_macro)),
        ("Gap (per-trial mean)", lambda s: _pp(s.gap_pp_macro)),
        *[(c, (lambda c: lambda s: str(s.class_counts[c]))(c)) for c in PARADOX_CLASSES],
    ]
    lines = ["## Observed paradox", "", header, sep]
    for label, fmt in rows:
        lines.append(f"| {label} | " + " | ".join(fmt(summaries[d]) for d in names) + " |")

    if len(names) >= 2:
        a, b = names[0], names[1]
        xs, ys = per_trial_gaps(groups[a]), per_trial_gaps(groups[b])
        lines += ["", f"## {a} vs {b}", ""]
        lines.append(f"- Observed difference (pooled gap): {summaries[a].gap_pp - summaries[b].gap_pp:.1f} pp")
        if xs and ys:
            mw = mann_whitney_u(xs, ys)
            kind = "exact" if mw.exact else "normal approx."
            lines.append(f"- Mann-Whitney U: {mw.U:.1f}, p = {mw.p_two_sided:.3g} ({kind}, per-trial gaps)")
            lo, hi = bootstrap_ci(xs, ys, b=bootstrap_b, level=0.95, seed=seed)
            lines.append(f"- Bootstrap 95% CI of mean per-trial gap difference: [{lo:.1f}, {hi:.1f}] pp "
                         f"(B={bootstrap_b}, seed={seed})")
    return "\n".join(lines) + "\n"
