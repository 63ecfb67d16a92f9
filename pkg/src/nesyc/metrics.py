"""Benchmark metrics: task success, goal conditions, step alignment and rule drift.

Every aggregate here is a pure function of episode records, so a run's
metrics can be recomputed offline from its JSONL traces.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .domain import knowledge_f1, rule_delta


@dataclass
class MetricsSummary:
    sr: float
    sr_std: float
    gc: float
    gc_std: float
    step: float
    step_std: float
    n_episodes: int
    hi_final: float = float("nan")
    f1_vs_oracle: float = float("nan")
    delta_per_phase: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in asdict(self).items()}

    def cell(self, name: str) -> str:
        """'92.0 ± 3.1' style table cell."""
        return f"{getattr(self, name):.1f} ± {getattr(self, name + '_std'):.1f}"


def _mean_std(xs: Sequence[float]) -> tuple:
    xs = list(xs)
    if not xs:
        return 0.0, 0.0
    m = sum(xs) / len(xs)
    if len(xs) < 2:
        return m, 0.0
    var = sum((x - m) ** 2 for x in xs) / (len(xs) - 1)
    return m, math.sqrt(var)


def seed_rates(episodes: Iterable[dict]) -> dict:
    """Percent SR/GC/Step for one seed's episode records (keys success, gc, step)."""
    eps = list(episodes)
    if not eps:
        raise ValueError("no episodes to aggregate")
    n = len(eps)
    return {"sr": 100.0 * sum(bool(e["success"]) for e in eps) / n,
            "gc": 100.0 * sum(float(e["gc"]) for e in eps) / n,
            "step": 100.0 * sum(float(e["step"]) for e in eps) / n,
            "n": n}


def summarize(per_seed: dict, **extra) -> MetricsSummary:
    """Means and sample standard deviations across seeds of per-seed rates."""
    rates = [seed_rates(eps) for _, eps in sorted(per_seed.items())]
    if not rates:
        raise ValueError("no seeds to aggregate")
    sr, sr_s = _mean_std([r["sr"] for r in rates])
    gc, gc_s = _mean_std([r["gc"] for r in rates])
    st, st_s = _mean_std([r["step"] for r in rates])
    return MetricsSummary(sr, sr_s, gc, gc_s, st, st_s, sum(r["n"] for r in rates), **extra)


def results_from_trace(events: Iterable[dict]) -> list:
    """Episode records recovered from trace events."""
    return [{k: ev[k] for k in ("success", "gc", "step", "steps_used", "refinements")}
            for ev in events if ev.get("event") == "result"]


def phase_table(phases: Sequence, oracle) -> list:
    """Per-phase Δ and F1 against the oracle rules.

    ``phases`` holds (rules after the phase, episode records) pairs; the
    rules before the first phase are taken to be empty.
    """
    rows = []
    prev: list = []
    for i, (rules, eps) in enumerate(phases, 1):
        clauses = list(rules)
        r = seed_rates(eps) if eps else {"sr": float("nan"), "gc": float("nan"), "step": float("nan")}
        rows.append({"phase": i, "sr": r["sr"], "gc": r["gc"],
                     "delta": rule_delta(prev, clauses),
                     "f1": 100.0 * knowledge_f1(clauses, oracle)})
        prev = clauses
    return rows


def write_csv(rows: Sequence[dict], path) -> None:
    rows = list(rows)
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=str) + "\n")
