"""Scores and failure attribution over episode traces."""

from __future__ import annotations

import csv
import io
import math
import statistics
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import CompatibilityError, UndefinedScoreError, UsageError
from .model import (
    Blueprint,
    EpisodeTrace,
    EvaluationQuestion,
    ReportBundle,
    blueprint_id,
    state_at,
    write_position,
)

LABELS = ("none", "write", "read", "utilization")
CSV_COLUMNS = ("position", "overall", "random", "ub", "memory", "write_rate", "read_rate", "util_rate")
SCORE_KEYS = CSV_COLUMNS[1:]


def memory_score(overall: float, random: float, ub: float) -> float:
    """``(overall - random) / (ub - random)``; may fall outside [0, 1]."""
    if ub == random:
        raise UndefinedScoreError(f"memory score undefined: upper bound equals random baseline ({ub})")
    return (overall - random) / (ub - random)


def random_baseline(blueprint: Blueprint, t: int) -> float:
    """Expected accuracy of uniform guessing at position ``t``."""
    counts = [len(q.options_at(t)) for q in blueprint.questions]
    return sum(1.0 / n for n in counts) / len(counts)


@dataclass(frozen=True)
class ProbeMatrix:
    correct_map: dict[tuple[int, str], bool]

    def correct(self, t: int, variable: str) -> bool:
        return self.correct_map[(t, variable)]

    @classmethod
    def from_trace(cls, trace: EpisodeTrace, blueprint: Blueprint) -> ProbeMatrix:
        out = {}
        for entry in trace.periods:
            truth = state_at(blueprint, entry.position)
            for v in blueprint.schema.names:
                out[(entry.position, v)] = entry.probe.get(v) == truth[v]
        return cls(out)

    def accuracy(self, t: int) -> float:
        cells = [ok for (pos, _), ok in self.correct_map.items() if pos == t]
        return sum(cells) / len(cells) if cells else 0.0


def classify_failure(question: EvaluationQuestion, t: int, correct_answer: bool, probes: ProbeMatrix,
                     blueprint: Blueprint) -> str:
    """One of none / write / read / utilization for a question at position ``t``."""
    if correct_answer:
        return "none"
    wrong_now = [v for v in question.required if not probes.correct(t, v)]
    if not wrong_now:
        return "utilization"
    if any(not probes.correct(write_position(blueprint, v, t), v) for v in wrong_now):
        return "write"
    return "read"


def check_compatible(trace: EpisodeTrace, blueprint: Blueprint) -> None:
    ref = blueprint_id(blueprint)
    if trace.blueprint_ref != ref:
        raise CompatibilityError(f"trace refers to blueprint {trace.blueprint_ref}, got {ref}")
    if [p.position for p in trace.periods] != list(range(blueprint.n_positions)):
        raise CompatibilityError("trace positions do not cover 0..N_p")
    ids = {q.id for q in blueprint.questions}
    for entry in trace.periods:
        if {e.question_id for e in entry.evaluations} != ids:
            raise CompatibilityError(f"position {entry.position}: evaluated questions differ from the blueprint")


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _safe_memory(overall: float, random: float, ub: float) -> float | None:
    try:
        return memory_score(overall, random, ub)
    except UndefinedScoreError:
        return None


def aggregate_report(trace: EpisodeTrace, blueprint: Blueprint) -> ReportBundle:
    check_compatible(trace, blueprint)
    probes = ProbeMatrix.from_trace(trace, blueprint)
    per_position, diagnostics = [], []
    for entry in trace.periods:
        t = entry.position
        n = len(entry.evaluations)
        counts = dict.fromkeys(LABELS, 0)
        for record in entry.evaluations:
            q = blueprint.question(record.question_id)
            label = classify_failure(q, t, record.correct, probes, blueprint)
            counts[label] += 1
            diagnostics.append({"position": t, "question_id": q.id, "correct": record.correct,
                                "ub_correct": record.ub_correct, "abstained": record.chosen is None,
                                "label": label})
        overall = sum(r.correct for r in entry.evaluations) / n
        ub = sum(r.ub_correct for r in entry.evaluations) / n
        rnd = random_baseline(blueprint, t)
        per_position.append({
            "position": t, "overall": overall, "random": rnd, "ub": ub, "memory": _safe_memory(overall, rnd, ub),
            "write_rate": counts["write"] / n, "read_rate": counts["read"] / n,
            "util_rate": counts["utilization"] / n, "probe_accuracy": probes.accuracy(t), "n_questions": n,
        })
    aggregate = {k: _mean([p[k] for p in per_position]) for k in ("overall", "random", "ub", "write_rate",
                                                                    "read_rate", "util_rate", "probe_accuracy")}
    aggregate["memory"] = _safe_memory(aggregate["overall"], aggregate["random"], aggregate["ub"])
    position_scores = [p["memory"] for p in per_position]
    aggregate["memory_position_mean"] = None if None in position_scores else _mean(position_scores)
    metadata = {
        "blueprint_ref": trace.blueprint_ref, "agent": trace.agent_descriptor, "agent_params": trace.agent_params,
        "mode": trace.mode, "replay_source": trace.replay_source, "seed": trace.seed,
        "n_positions": len(trace.periods), "n_sessions": trace.n_sessions, "n_rounds": trace.n_rounds,
        "n_evaluations": sum(len(p.evaluations) for p in trace.periods),
        "abstentions": sum(1 for d in diagnostics if d["abstained"]),
    }
    return ReportBundle(tuple(per_position), tuple(diagnostics), aggregate, metadata)


def diagnosis(trace: EpisodeTrace, blueprint: Blueprint) -> dict:
    """Failure labels plus the probe matrix, per position."""
    bundle = aggregate_report(trace, blueprint)
    probes = ProbeMatrix.from_trace(trace, blueprint)
    return {
        "blueprint_ref": trace.blueprint_ref,
        "agent": trace.agent_descriptor,
        "labels": list(bundle.diagnostics),
        "probes": [{"position": t, "variable": v, "correct": ok,
                    "write_position": write_position(blueprint, v, t)}
                   for (t, v), ok in sorted(probes.correct_map.items())],
        "rates": [{k: p[k] for k in ("position", "write_rate", "read_rate", "util_rate", "probe_accuracy")}
                  for p in bundle.per_position],
    }


# --------------------------------------------------------------------------
# merging and emission


def merge_users(bundles: Sequence[ReportBundle]) -> ReportBundle:
    """Per-position unweighted means across users."""
    if not bundles:
        raise UsageError("no report bundles to merge")
    n_pos = {len(b.per_position) for b in bundles}
    if len(n_pos) != 1:
        raise CompatibilityError(f"reports disagree on the number of positions: {sorted(n_pos)}")
    per_position = []
    for t in range(n_pos.pop()):
        rows = [b.per_position[t] for b in bundles]
        row = {"position": t}
        for key in ("overall", "random", "ub", "write_rate", "read_rate", "util_rate"):
            row[key] = _mean([r[key] for r in rows])
        row["memory"] = _safe_memory(row["overall"], row["random"], row["ub"])
        per_position.append(row)
    aggregate = {k: _mean([p[k] for p in per_position])
                 for k in ("overall", "random", "ub", "write_rate", "read_rate", "util_rate")}
    aggregate["memory"] = _safe_memory(aggregate["overall"], aggregate["random"], aggregate["ub"])
    metadata = {"n_users": len(bundles), "users": [b.metadata.get("blueprint_ref") for b in bundles],
                "n_sessions": sum(b.metadata.get("n_sessions", 0) for b in bundles),
                "n_rounds": sum(b.metadata.get("n_rounds", 0) for b in bundles),
                "n_evaluations": sum(b.metadata.get("n_evaluations", 0) for b in bundles)}
    return ReportBundle(tuple(per_position), (), aggregate, metadata)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(round(value, 12))
    return str(value)


def report_csv(bundles: Iterable[ReportBundle]) -> str:
    """Per-position rows; a leading ``user`` column appears when several bundles are emitted."""
    bundles = list(bundles)
    if not bundles:
        raise UsageError("no report bundles to emit")
    multi = len(bundles) > 1
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow((["user"] if multi else []) + list(CSV_COLUMNS))
    for b in bundles:
        for row in b.per_position:
            prefix = [b.metadata.get("blueprint_ref", "")] if multi else []
            writer.writerow(prefix + [_fmt(row.get(k)) for k in CSV_COLUMNS])
    return buf.getvalue()


def repeat_summary(runs: Sequence[ReportBundle]) -> list[dict]:
    """Mean and sample standard deviation per position across repeated runs."""
    if not runs:
        raise UsageError("no runs to summarize")
    n_pos = {len(r.per_position) for r in runs}
    if len(n_pos) != 1:
        raise CompatibilityError("repeated runs disagree on the number of positions")
    rows = []
    for t in range(n_pos.pop()):
        row: dict = {"position": t}
        for key in SCORE_KEYS:
            values = [r.per_position[t][key] for r in runs]
            values = [v for v in values if v is not None and not (isinstance(v, float) and math.isnan(v))]
            row[f"{key}_mean"] = _mean(values) if values else None
            row[f"{key}_std"] = statistics.stdev(values) if len(values) >= 2 else None
        rows.append(row)
    return rows


def repeat_csv(rows: Sequence[Mapping]) -> str:
    columns = ["position"] + [f"{k}_{s}" for k in SCORE_KEYS for s in ("mean", "std")]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()
