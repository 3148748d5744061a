"""Iterative plan optimization over a bounded, score-sorted candidate queue.

Each round the optimizer agent writes K candidates from the current queue and
the evaluator's feedback on its best plan. Every candidate is annotated with
error-prone points, scored, and buffered; the buffer is merged into the queue
with a single sort-and-trim at the end of the round. The queue keeps the P
highest-scoring plans in ascending order, so its maximum never drops.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Mapping, Optional, Sequence, Union

from . import prompts
from .analysis import DEFAULT_WEAKNESS_THRESHOLD, MistakeDatabase, aaea_annotate
from .backend import AgentConfig, Backend, ask_parsed, user
from .corpus import sample_questions
from .domain import (
    EvalResult,
    ExampleItem,
    LessonPlan,
    SkillTree,
    TestQuestion,
    render_plan_text,
    render_skill_tree_fragment,
)
from .errors import (
    DomainError,
    EmptyQueue,
    EmptyResponse,
    HttpStatusError,
    NetworkError,
    ParseError,
    PlanParseError,
)
from .evaluation import eaee_evaluate
from .runlog import ACCEPTED, REJECTED, CandidateRecord, RoundRecord, RunRecord

log = logging.getLogger(__name__)

PLAN_REASK = (
    "Your reply could not be read as an instructional design. Reply again using the section markers "
    "KNOWLEDGE:, EXAMPLE 1:, SOLUTION:, EXAMPLE 2:, SOLUTION: ... each on its own line."
)

# Failures that reject one candidate instead of aborting the run.
CANDIDATE_FAILURES = (ParseError, NetworkError, EmptyResponse, HttpStatusError)


@dataclass(frozen=True)
class OptimizeConfig:
    rounds: int = 10
    branching: int = 3
    capacity: int = 5
    questions_per_eval: int = 5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        for name in ("branching", "capacity", "questions_per_eval"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Queue
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QueueEntry:
    plan: LessonPlan
    score: float
    inserted_at: int


@dataclass(frozen=True)
class CandidateQueue:
    capacity: int
    entries: tuple[QueueEntry, ...] = ()
    next_seq: int = 0

    def __post_init__(self) -> None:
        if self.capacity < 1:
            raise ValueError("queue capacity must be >= 1")
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def scores(self) -> list[float]:
        return [e.score for e in self.entries]

    @property
    def best(self) -> QueueEntry:
        if not self.entries:
            raise EmptyQueue("queue is empty")
        return self.entries[-1]

    def snapshot(self) -> tuple[tuple[str, float], ...]:
        return tuple((e.plan.id, e.score) for e in self.entries)


def _sort_key(e: QueueEntry) -> tuple[float, int]:
    return (e.score, e.inserted_at)


def queue_merge(queue: CandidateQueue, items: Sequence[tuple[LessonPlan, float]]) -> CandidateQueue:
    """Insert several (plan, score) pairs, then sort ascending and keep the top P once."""
    entries = list(queue.entries)
    seq = queue.next_seq
    for plan, score in items:
        if not (0.0 <= score <= 100.0):
            raise ValueError(f"score {score} outside [0, 100]")
        entries.append(QueueEntry(plan, float(score), seq))
        seq += 1
    entries.sort(key=_sort_key)
    return CandidateQueue(queue.capacity, tuple(entries[-queue.capacity:]), seq)


def queue_update(queue: CandidateQueue, plan: LessonPlan, score: float) -> CandidateQueue:
    return queue_merge(queue, [(plan, score)])


def best_plan(queue: CandidateQueue) -> LessonPlan:
    """Highest-scoring plan; on ties the most recently inserted one."""
    return queue.best.plan


# ---------------------------------------------------------------------------
# Plan text <-> LessonPlan
# ---------------------------------------------------------------------------

_MARKER = re.compile(
    r"^[ \t>#*]*(KNOWLEDGE|EXAMPLE(?:[ \t]*\d+)?|SOLUTION|ERROR-PRONE POINTS)[ \t*]*:[ \t*]*(.*)$",
    re.IGNORECASE | re.MULTILINE,
)


def _from_json(text: str) -> Optional[tuple[str, list[tuple[str, str]]]]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError:
        return None
    if not isinstance(data, dict) or "knowledge_explanation" not in data:
        return None
    try:
        examples = [(e["statement"], e["worked_solution"]) for e in data.get("examples", [])]
    except (KeyError, TypeError) as exc:
        raise PlanParseError(f"JSON plan has malformed examples: {exc!r}") from exc
    return str(data["knowledge_explanation"]), examples


def _from_markers(text: str) -> tuple[str, list[tuple[str, str]]]:
    marks = list(_MARKER.finditer(text))
    if not marks:
        raise PlanParseError("no KNOWLEDGE/EXAMPLE/SOLUTION markers found")
    sections = []
    for i, m in enumerate(marks):
        end = marks[i + 1].start() if i + 1 < len(marks) else len(text)
        kind = m.group(1).upper().split()[0]
        kind = "EXAMPLE" if kind.startswith("EXAMPLE") else kind
        body = (m.group(2) + text[m.end():end]).strip()
        sections.append((kind, body))

    knowledge = [b for k, b in sections if k == "KNOWLEDGE"]
    if len(knowledge) != 1:
        raise PlanParseError(f"expected one KNOWLEDGE section, found {len(knowledge)}")
    examples: list[tuple[str, str]] = []
    pending: Optional[str] = None
    for kind, body in sections:
        if kind == "EXAMPLE":
            if pending is not None:
                raise PlanParseError("EXAMPLE without a SOLUTION")
            pending = body
        elif kind == "SOLUTION":
            if pending is None:
                raise PlanParseError("SOLUTION without a preceding EXAMPLE")
            examples.append((pending, body))
            pending = None
    if pending is not None:
        raise PlanParseError("last EXAMPLE has no SOLUTION")
    return knowledge[0], examples


def parse_plan_text(
    text: str,
    *,
    plan_id: str,
    topic: str,
    parent_id: Optional[str] = None,
    round: int = 0,
) -> LessonPlan:
    """Parse an agent reply into a plan.

    Accepts the marker layout produced by :func:`render_plan_text` or a JSON
    object with ``knowledge_explanation`` and ``examples``. Error-prone point
    sections are dropped; annotation regenerates them.
    """
    stripped = (text or "").strip()
    parsed = _from_json(stripped) if stripped.startswith("{") else None
    knowledge, examples = parsed if parsed is not None else _from_markers(stripped)
    if not knowledge.strip():
        raise PlanParseError("knowledge explanation is empty")
    if not examples:
        raise PlanParseError("plan has no examples")
    if any(not s.strip() or not w.strip() for s, w in examples):
        raise PlanParseError("every example needs a statement and a worked solution")
    try:
        return LessonPlan(
            id=plan_id,
            topic=topic,
            knowledge_explanation=knowledge.strip(),
            examples=tuple(ExampleItem(s.strip(), w.strip()) for s, w in examples),
            parent_id=parent_id,
            round=round,
        )
    except DomainError as exc:
        raise PlanParseError(str(exc)) from exc


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------


def initial_plan_prompt(tree: SkillTree, topic: Optional[str] = None) -> str:
    return prompts.render(
        "generate_initial",
        topic=topic or tree.topic,
        skill_tree=render_skill_tree_fragment(tree),
        plan_format=prompts.template("plan_format").strip(),
    )


def generate_initial_plan(
    backend: Backend,
    optimizer_config: AgentConfig,
    tree: SkillTree,
    topic: Optional[str] = None,
    plan_id: str = "initial",
) -> LessonPlan:
    topic = topic or tree.topic

    def parse(text: str) -> LessonPlan:
        return parse_plan_text(text, plan_id=plan_id, topic=topic)

    return ask_parsed(backend, optimizer_config, [user(initial_plan_prompt(tree, topic))], parse, PLAN_REASK)


def _format_queue(queue: CandidateQueue) -> str:
    blocks = []
    for i, e in enumerate(queue.entries, 1):
        blocks.append(f"--- Design {i} (score {e.score:.2f}) ---\n{render_plan_text(e.plan)}")
    return "\n\n".join(blocks)


def optimization_prompt(
    feedback: tuple[str, str],
    queue: CandidateQueue,
    tree: SkillTree,
    candidate: int = 1,
    branching: int = 1,
) -> str:
    advantages, disadvantages = feedback
    return prompts.render(
        "optimize",
        skill_tree=render_skill_tree_fragment(tree),
        optimization_task=prompts.template("optimization_task").strip(),
        queue=_format_queue(queue),
        advantages=advantages,
        disadvantages=disadvantages,
        candidate=candidate,
        branching=branching,
        plan_format=prompts.template("plan_format").strip(),
    )


def generate_candidate(
    backend: Backend,
    optimizer_config: AgentConfig,
    feedback: tuple[str, str],
    queue: CandidateQueue,
    tree: SkillTree,
    plan_id: Optional[str] = None,
    candidate: int = 1,
    branching: int = 1,
) -> LessonPlan:
    """Ask the optimizer for a new plan derived from the queue's best entry."""
    parent = best_plan(queue)
    new_round = parent.round + 1
    pid = plan_id or f"{parent.id}.{new_round}.{candidate}"

    def parse(text: str) -> LessonPlan:
        return parse_plan_text(text, plan_id=pid, topic=parent.topic, parent_id=parent.id, round=new_round)

    msgs = [user(optimization_prompt(feedback, queue, tree, candidate, branching))]
    return ask_parsed(backend, optimizer_config, msgs, parse, PLAN_REASK)


# ---------------------------------------------------------------------------
# Optimization loop
# ---------------------------------------------------------------------------

Backends = Union[Backend, Mapping[str, Backend]]


def _backend_for(backends: Backends, role: str) -> Backend:
    if isinstance(backends, Mapping):
        return backends[role]
    return backends


@dataclass
class _Outcome:
    plan_id: str
    plan: Optional[LessonPlan] = None
    evaluation: Optional[EvalResult] = None
    error: Optional[str] = None


def oaeo_run(
    backends: Backends,
    configs: Mapping[str, AgentConfig],
    initial_plan: LessonPlan,
    tree: SkillTree,
    questions: Sequence[TestQuestion],
    cmd: MistakeDatabase,
    opt: OptimizeConfig,
    *,
    threshold: float = DEFAULT_WEAKNESS_THRESHOLD,
    max_workers: int = 1,
    extra_config: Optional[dict] = None,
) -> tuple[CandidateQueue, RunRecord]:
    """Run the optimization loop and return the final queue and its record.

    ``backends`` is one backend for every role or a mapping keyed by role
    (evaluator, optimizer, analyst). The evaluation questions are drawn once
    per run from ``questions`` with ``opt.seed`` so every plan faces the same
    test. Candidates that fail to parse or transport after retries are
    recorded as rejected; the round continues with the rest.
    """
    evaluator, optimizer, analyst = (configs[r] for r in ("evaluator", "optimizer", "analyst"))
    eval_set = sample_questions(questions, opt.questions_per_eval, opt.seed)
    plans: dict[str, LessonPlan] = {}
    evaluations: dict[str, EvalResult] = {}

    def evaluate(plan: LessonPlan) -> EvalResult:
        return eaee_evaluate(_backend_for(backends, "evaluator"), evaluator, plan, tree, eval_set)

    initial_eval = evaluate(initial_plan)
    plans[initial_plan.id] = initial_plan
    evaluations[initial_plan.id] = initial_eval
    queue = queue_update(CandidateQueue(opt.capacity), initial_plan, initial_eval.post_score)

    rounds: list[RoundRecord] = []
    for n in range(1, opt.rounds + 1):
        parent = queue.best.plan
        parent_eval = evaluations[parent.id]
        feedback = (parent_eval.advantages, parent_eval.disadvantages)

        def run_candidate(k: int, queue=queue, feedback=feedback) -> _Outcome:
            out = _Outcome(plan_id=f"r{n}c{k}")
            try:
                plan = generate_candidate(
                    _backend_for(backends, "optimizer"), optimizer, feedback, queue, tree,
                    plan_id=out.plan_id, candidate=k, branching=opt.branching,
                )
                plan = aaea_annotate(_backend_for(backends, "analyst"), analyst, plan, cmd, tree, threshold)
                out.evaluation = evaluate(plan)
                out.plan = plan
            except CANDIDATE_FAILURES as exc:
                log.warning("round %d candidate %d rejected: %s", n, k, exc)
                out.error = f"{type(exc).__name__}: {exc}"
            return out

        ks = range(1, opt.branching + 1)
        if max_workers > 1:
            with ThreadPoolExecutor(max_workers=max_workers) as pool:
                outcomes = list(pool.map(run_candidate, ks))
        else:
            outcomes = [run_candidate(k) for k in ks]

        buffer = []
        records = []
        for o in outcomes:
            if o.plan is not None and o.evaluation is not None:
                plans[o.plan_id] = o.plan
                evaluations[o.plan_id] = o.evaluation
                buffer.append((o.plan, o.evaluation.post_score))
                records.append(CandidateRecord(o.plan_id, ACCEPTED, o.evaluation.post_score))
            else:
                records.append(CandidateRecord(o.plan_id, REJECTED, None, o.error))
        queue = queue_merge(queue, buffer)
        rounds.append(RoundRecord(n, parent.id, tuple(records), queue.snapshot(), queue.best.score))
        log.info("round %d: best %.2f (%d/%d accepted)", n, queue.best.score, len(buffer), opt.branching)

    config = {
        "optimize": opt.to_dict(),
        "agents": {role: configs[role].to_dict() for role in ("evaluator", "optimizer", "analyst")},
        "weakness_threshold": threshold,
        "skill_tree": tree.to_dict(),
        "eval_questions": [q.id for q in eval_set],
    }
    config.update(extra_config or {})
    record = RunRecord(
        config=config,
        initial_plan_id=initial_plan.id,
        initial_score=initial_eval.post_score,
        rounds=tuple(rounds),
        final_queue=tuple((e.plan.id, e.score, e.inserted_at) for e in queue.entries),
        plans=plans,
        evaluations=evaluations,
    )
    return queue, record
