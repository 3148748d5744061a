"""Run records: canonical persistence, digests, and report rendering.

A persisted run is ``run.json`` with three top-level keys::

    {"digest": <sha256 hex>, "meta": {...}, "record": {...}}

Only ``record`` is covered by the digest. It holds no timestamps or paths, so
replaying a run with the same inputs reproduces the digest exactly. ``meta``
carries wall-clock data and whatever the CLI needs to re-execute the run.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass, field
from decimal import Decimal
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Sequence

from .domain import EvalResult, LessonPlan
from .errors import RecordValidationError

ACCEPTED, REJECTED = "accepted", "rejected"
RUN_FILE, CURVE_FILE, BEST_PLAN_FILE = "run.json", "curve.csv", "best_plan.json"


@dataclass(frozen=True)
class CandidateRecord:
    plan_id: str
    status: str
    score: Optional[float] = None
    error: Optional[str] = None

    def to_dict(self) -> dict:
        return {"plan_id": self.plan_id, "status": self.status, "score": self.score, "error": self.error}

    @classmethod
    def from_dict(cls, d: dict) -> "CandidateRecord":
        return cls(d["plan_id"], d["status"], d.get("score"), d.get("error"))


@dataclass(frozen=True)
class RoundRecord:
    index: int
    parent_id: str
    candidates: tuple[CandidateRecord, ...]
    queue: tuple[tuple[str, float], ...]  # ascending (plan id, score) after the merge
    best_score: float

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "parent_id": self.parent_id,
            "candidates": [c.to_dict() for c in self.candidates],
            "queue": [{"id": i, "score": s} for i, s in self.queue],
            "best_score": self.best_score,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoundRecord":
        return cls(
            index=d["index"],
            parent_id=d["parent_id"],
            candidates=tuple(CandidateRecord.from_dict(c) for c in d["candidates"]),
            queue=tuple((q["id"], q["score"]) for q in d["queue"]),
            best_score=d["best_score"],
        )


@dataclass(frozen=True)
class RunRecord:
    config: dict
    initial_plan_id: str
    initial_score: float
    rounds: tuple[RoundRecord, ...]
    final_queue: tuple[tuple[str, float, int], ...]  # ascending (plan id, score, insertion seq)
    plans: dict[str, LessonPlan] = field(default_factory=dict)
    evaluations: dict[str, EvalResult] = field(default_factory=dict)

    def curve(self) -> list[tuple[int, float]]:
        return [(0, self.initial_score)] + [(r.index, r.best_score) for r in self.rounds]

    def best_plan(self) -> LessonPlan:
        if not self.final_queue:
            raise RecordValidationError("run has an empty final queue")
        return self.plans[self.final_queue[-1][0]]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "initial": {"plan_id": self.initial_plan_id, "score": self.initial_score},
            "rounds": [r.to_dict() for r in self.rounds],
            "final_queue": [{"id": i, "score": s, "seq": q} for i, s, q in self.final_queue],
            "plans": {pid: p.to_dict() for pid, p in sorted(self.plans.items())},
            "evaluations": {pid: e.to_dict() for pid, e in sorted(self.evaluations.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(
            config=d["config"],
            initial_plan_id=d["initial"]["plan_id"],
            initial_score=d["initial"]["score"],
            rounds=tuple(RoundRecord.from_dict(r) for r in d["rounds"]),
            final_queue=tuple((q["id"], q["score"], q["seq"]) for q in d["final_queue"]),
            plans={pid: LessonPlan.from_dict(p) for pid, p in d["plans"].items()},
            evaluations={pid: EvalResult.from_dict(e) for pid, e in d.get("evaluations", {}).items()},
        )


def validate_record(record: RunRecord) -> None:
    """Referential and consistency checks; raises RecordValidationError."""
    plans = record.plans

    def need(pid: str, where: str) -> None:
        if pid not in plans:
            raise RecordValidationError(f"{where} references unknown plan {pid!r}")

    need(record.initial_plan_id, "initial")
    expected_rounds = record.config.get("optimize", {}).get("rounds")
    if expected_rounds is not None and len(record.rounds) != expected_rounds:
        raise RecordValidationError(f"expected {expected_rounds} rounds, record has {len(record.rounds)}")
    prev_best = record.initial_plan_id
    prev_score = record.initial_score
    for r in record.rounds:
        need(r.parent_id, f"round {r.index} parent")
        if r.parent_id != prev_best:
            raise RecordValidationError(f"round {r.index} parent {r.parent_id!r} was not the queue maximum")
        for c in r.candidates:
            if c.status not in (ACCEPTED, REJECTED):
                raise RecordValidationError(f"round {r.index}: bad candidate status {c.status!r}")
            if c.status == ACCEPTED:
                need(c.plan_id, f"round {r.index} candidate")
                if plans[c.plan_id].parent_id != r.parent_id:
                    raise RecordValidationError(f"plan {c.plan_id!r} lineage does not match round parent")
        for pid, _ in r.queue:
            need(pid, f"round {r.index} queue")
        if not r.queue or r.best_score != max(s for _, s in r.queue):
            raise RecordValidationError(f"round {r.index}: best_score is not the queue maximum")
        if r.best_score < prev_score:
            raise RecordValidationError(f"round {r.index}: best score decreased")
        prev_best, prev_score = r.queue[-1][0], r.best_score
    for pid, _, _ in record.final_queue:
        need(pid, "final queue")


def canonical_json(data: Any) -> str:
    return json.dumps(data, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def record_digest(record: RunRecord) -> str:
    return hashlib.sha256(canonical_json(record.to_dict()).encode("utf-8")).hexdigest()


def record_run(record: RunRecord, path, meta: Optional[dict] = None) -> str:
    """Validate and write ``record`` to ``path``; returns the digest."""
    validate_record(record)
    digest = record_digest(record)
    doc = {"digest": digest, "meta": meta or {}, "record": record.to_dict()}
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True, ensure_ascii=False, indent=1) + "\n", encoding="utf-8")
    return digest


def read_run(path) -> tuple[RunRecord, str, dict]:
    """Returns (record, stored digest, meta)."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return RunRecord.from_dict(doc["record"]), doc["digest"], doc.get("meta", {})


def write_run_dir(record: RunRecord, run_dir, meta: Optional[dict] = None) -> str:
    run_dir = Path(run_dir)
    digest = record_run(record, run_dir / RUN_FILE, meta)
    (run_dir / CURVE_FILE).write_text(curve_csv(record), encoding="utf-8")
    (run_dir / BEST_PLAN_FILE).write_text(
        json.dumps(record.best_plan().to_dict(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return digest


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def curve_csv(record: RunRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["round", "best_score"])
    for rnd, score in record.curve():
        w.writerow([rnd, repr(float(score))])
    return buf.getvalue()


@dataclass(frozen=True)
class ScoreTable:
    """A strategy-by-metric table whose cells keep their original spelling."""

    title: str
    columns: tuple[str, ...]
    rows: tuple[tuple[str, tuple[str, ...]], ...]

    def row(self, strategy: str) -> dict[str, str]:
        for name, cells in self.rows:
            if name == strategy:
                return dict(zip(self.columns, cells))
        raise KeyError(strategy)


def parse_score_table(text: str) -> ScoreTable:
    # Decimal keeps "42.0" as "42.0" so rendering is exact
    data = json.loads(text, parse_float=Decimal)
    columns = tuple(data["columns"])
    rows = tuple((r["strategy"], tuple(str(r[c]) for c in columns)) for r in data["rows"])
    return ScoreTable(data["title"], columns, rows)


def load_score_table(path) -> ScoreTable:
    return parse_score_table(Path(path).read_text(encoding="utf-8"))


BUNDLED_TABLES = ("quality_indicators", "ablation")


def bundled_table(name: str) -> ScoreTable:
    if name not in BUNDLED_TABLES:
        raise KeyError(f"unknown bundled table {name!r}; choose from {BUNDLED_TABLES}")
    return parse_score_table(resources.files("planforge").joinpath(f"data/{name}.json").read_text(encoding="utf-8"))


def format_table(table: ScoreTable) -> str:
    header = ("Strategy",) + table.columns
    body = [(name,) + cells for name, cells in table.rows]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    line = lambda cells: " | ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()  # noqa: E731
    out = [table.title, line(header), "-+-".join("-" * w for w in widths)]
    out += [line(r) for r in body]
    return "\n".join(out)


def render_report(record: Optional[RunRecord], fixtures: Sequence[ScoreTable] = ()) -> tuple[str, str]:
    """Text report plus the (round, best_score) curve CSV ("" without a record)."""
    parts = [format_table(t) for t in fixtures]
    csv_text = ""
    if record is not None:
        csv_text = curve_csv(record)
        best = record.best_plan()
        parts.append(
            f"Run: {len(record.rounds)} rounds, initial score {record.initial_score:.2f}, "
            f"best score {record.final_queue[-1][1]:.2f} (plan {best.id})"
        )
        parts.append("\n".join(f"round {r}: {s:.2f}" for r, s in record.curve()))
    return "\n\n".join(parts), csv_text
