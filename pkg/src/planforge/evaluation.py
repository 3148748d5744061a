"""Expert evaluation of lesson plans and five-dimension rubric judging.

Two verdict grammars are parsed here:

* per-question evaluator replies, three lines in any order::

      SCORE: 85
      ADVANTAGE: clear worked steps
      DISADVANTAGE: no visual aids

* rubric judge replies, five labelled segments ``[A]: <points>; <analysis>``
  through ``[E]``, bound to dimensions by label rather than position.

Parsers are strict: a reply that cannot be read unambiguously raises
:class:`VerdictParseError` rather than yielding a guessed number.
"""

from __future__ import annotations

import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

from . import prompts
from .backend import AgentConfig, Backend, ask_parsed, user
from .domain import (
    CIDPP_DIMENSIONS,
    CiddpScore,
    EvalResult,
    LessonPlan,
    SkillTree,
    TestQuestion,
    render_plan_text,
    render_skill_tree_fragment,
)
from .errors import EmptyQuestionSet, ScoreOutOfRange, VerdictParseError

log = logging.getLogger(__name__)

DEFAULT_QUESTIONS_PER_EVAL = 5

_NUMBER = r"[+-]?\d+(?:\.\d+)?"
_LINE_KEY = re.compile(
    r"^[ \t>*#\-]*(SCORE|ADVANTAGE|DISADVANTAGE)[ \t]*\**[ \t]*:[ \t]*\**[ \t]*(.*?)[ \t]*$",
    re.IGNORECASE | re.MULTILINE,
)
_SCORE_VALUE = re.compile(rf"^({_NUMBER})\s*(?:/\s*100)?$")

VERDICT_REASK = (
    "Your reply did not follow the required format. Reply again with exactly the three lines "
    "SCORE: <integer 0-100>, ADVANTAGE: <text>, DISADVANTAGE: <text>."
)
SUMMARY_REASK = (
    "Your reply did not follow the required format. Reply again with exactly the two lines "
    "ADVANTAGE: <text> and DISADVANTAGE: <text>."
)
CIDPP_REASK = (
    'Your reply did not follow the required format. Output your final verdict as "[A]: [points]; '
    '[short analyzes]" through "[E]: [points]; [short analyzes]", with points between 0 and 100.'
)


def _fmt(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return f"{value:.6f}".rstrip("0").rstrip(".")


def _check_range(value: float, what: str) -> float:
    if not (0.0 <= value <= 100.0):
        raise ScoreOutOfRange(f"{what} {_fmt(value)} outside [0, 100]")
    return value


def _first_lines(text: str) -> dict[str, str]:
    found: dict[str, str] = {}
    for m in _LINE_KEY.finditer(text or ""):
        found.setdefault(m.group(1).upper(), m.group(2).rstrip("*").strip())
    return found


def parse_question_verdict(text: str) -> tuple[float, str, str]:
    lines = _first_lines(text)
    for key in ("SCORE", "ADVANTAGE", "DISADVANTAGE"):
        if key not in lines:
            raise VerdictParseError(f"verdict has no {key} line")
    m = _SCORE_VALUE.match(lines["SCORE"])
    if not m:
        raise VerdictParseError(f"unreadable SCORE value {lines['SCORE']!r}")
    score = _check_range(float(m.group(1)), "SCORE")
    if not lines["ADVANTAGE"] or not lines["DISADVANTAGE"]:
        raise VerdictParseError("ADVANTAGE and DISADVANTAGE must be non-empty")
    return score, lines["ADVANTAGE"], lines["DISADVANTAGE"]


def render_question_verdict(score: float, advantage: str, disadvantage: str) -> str:
    return f"SCORE: {_fmt(score)}\nADVANTAGE: {advantage}\nDISADVANTAGE: {disadvantage}"


def parse_summary(text: str) -> tuple[str, str]:
    lines = _first_lines(text)
    adv, dis = lines.get("ADVANTAGE", ""), lines.get("DISADVANTAGE", "")
    if not adv or not dis:
        raise VerdictParseError("summary needs non-empty ADVANTAGE and DISADVANTAGE lines")
    return adv, dis


def _question_block(q: TestQuestion) -> str:
    return f"{q.statement.strip()}\nReference answer: {q.reference_answer.strip()}"


def question_prompt(plan: LessonPlan, tree: SkillTree, question: TestQuestion) -> str:
    return prompts.render(
        "evaluate_question",
        skill_tree=render_skill_tree_fragment(tree),
        lesson_plan=render_plan_text(plan),
        question=_question_block(question),
        evaluation_task=prompts.template("evaluation_task").strip(),
    )


def summary_prompt(advantages: Sequence[str], disadvantages: Sequence[str]) -> str:
    return prompts.render(
        "summarize",
        advantages="\n".join(f"{i}. {a}" for i, a in enumerate(advantages, 1)),
        disadvantages="\n".join(f"{i}. {d}" for i, d in enumerate(disadvantages, 1)),
    )


def eaee_evaluate(
    backend: Backend,
    evaluator_config: AgentConfig,
    plan: LessonPlan,
    tree: SkillTree,
    questions: Sequence[TestQuestion],
    max_workers: int = 1,
) -> EvalResult:
    """Score ``plan`` by predicting how the tree's students do on each question.

    One evaluator call per question, then one summarizing call that merges the
    per-question strengths and weaknesses. The post score is the plain mean of
    the per-question scores. Question calls may run on ``max_workers`` threads;
    results are always kept in question order.
    """
    if not questions:
        raise EmptyQuestionSet("evaluation needs at least one test question")

    def ask(q: TestQuestion) -> tuple[float, str, str]:
        msgs = [user(question_prompt(plan, tree, q))]
        return ask_parsed(backend, evaluator_config, msgs, parse_question_verdict, VERDICT_REASK)

    if max_workers > 1 and len(questions) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            verdicts = list(pool.map(ask, questions))
    else:
        verdicts = [ask(q) for q in questions]

    scores = tuple(v[0] for v in verdicts)
    post = math.fsum(scores) / len(scores)
    adv, dis = ask_parsed(
        backend,
        evaluator_config,
        [user(summary_prompt([v[1] for v in verdicts], [v[2] for v in verdicts]))],
        parse_summary,
        SUMMARY_REASK,
    )
    return EvalResult(post_score=post, advantages=adv, disadvantages=dis, per_question_scores=scores)


# ---------------------------------------------------------------------------
# Rubric judge
# ---------------------------------------------------------------------------

LABELS = ("A", "B", "C", "D", "E")
_SEGMENT_LABEL = re.compile(r"\[\s*([A-E])\s*\]\s*:")
_SEGMENT_VALUE = re.compile(rf"\s*\[?\s*({_NUMBER})\s*\]?\s*;")
_FORMAT_ECHO = re.compile(r"\s*\[\s*points\s*\]", re.IGNORECASE)
_OVERALL = re.compile(rf"^[ \t*]*(?:overall(?:[ \t]+score)?|total[ \t]+score)[ \t*]*[:=][ \t*]*({_NUMBER})\b",
                      re.IGNORECASE | re.MULTILINE)


def parse_ciddp_verdict(text: str) -> tuple[float, float, float, float, float]:
    """Read the five rubric points in dimension order (A=Clarity ... E=Pertinence)."""
    values: dict[str, float] = {}
    for m in _SEGMENT_LABEL.finditer(text or ""):
        label = m.group(1)
        if _FORMAT_ECHO.match(text, m.end()):
            continue  # judge restated the format template
        v = _SEGMENT_VALUE.match(text, m.end())
        if not v:
            raise VerdictParseError(f"segment [{label}] has no '<points>;' value")
        value = _check_range(float(v.group(1)), f"[{label}] points")
        if label in values and values[label] != value:
            raise VerdictParseError(f"segment [{label}] given conflicting values")
        values[label] = value
    missing = [lbl for lbl in LABELS if lbl not in values]
    if missing:
        raise VerdictParseError(f"verdict missing segments {missing}")
    return tuple(values[lbl] for lbl in LABELS)  # type: ignore[return-value]


def parse_judge_overall(text: str) -> Optional[float]:
    m = _OVERALL.search(text or "")
    if not m:
        return None
    return _check_range(float(m.group(1)), "overall score")


def render_ciddp_verdict(values: Sequence[float], analyses: Optional[Sequence[str]] = None) -> str:
    analyses = analyses or ["ok"] * 5
    return "\n".join(f"[{lbl}]: {_fmt(v)}; {a}" for lbl, v, a in zip(LABELS, values, analyses))


def judge_prompt(plan: LessonPlan) -> str:
    return prompts.render("cidpp_judge", lessonplan=render_plan_text(plan))


def ciddp_assess(
    backend: Backend,
    judge_config: AgentConfig,
    plan: LessonPlan,
    weights: Optional[Sequence[float]] = None,
) -> CiddpScore:
    def parse(text: str):
        return parse_ciddp_verdict(text), parse_judge_overall(text)

    dims, overall = ask_parsed(backend, judge_config, [user(judge_prompt(plan))], parse, CIDPP_REASK)
    return CiddpScore.from_dimensions(dims, weights=weights, judge_overall=overall)


def format_ciddp(score: CiddpScore) -> str:
    lines = [f"{name.capitalize()}: {_fmt(getattr(score, name))}" for name in CIDPP_DIMENSIONS]
    lines.append(f"Aggregate: {score.aggregate:.1f}")
    if score.judge_overall is not None:
        lines.append(f"Judge overall: {_fmt(score.judge_overall)}")
    return "\n".join(lines)
