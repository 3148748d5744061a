import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import score_by_question
from planforge import prompts
from planforge.backend import AgentConfig, CallableBackend
from planforge.domain import TestQuestion
from planforge.errors import EmptyQuestionSet, ScoreOutOfRange, VerdictParseError
from planforge.evaluation import (
    ciddp_assess,
    eaee_evaluate,
    format_ciddp,
    judge_prompt,
    parse_ciddp_verdict,
    parse_judge_overall,
    parse_question_verdict,
    parse_summary,
    question_prompt,
    render_ciddp_verdict,
    render_question_verdict,
)

EVAL = AgentConfig("evaluator")
JUDGE = AgentConfig("judge")
CANONICAL = "[A]: 84; clear [B]: 87; complete [C]: 88; deep [D]: 87; applied [E]: 83; targeted"


def test_mean_of_three(plan, tree, questions):
    backend = score_by_question({"q1": 80, "q2": 90, "q3": 100})
    res = eaee_evaluate(backend, EVAL, plan, tree, questions[:3])
    assert res.post_score == 90.0
    assert res.per_question_scores == (80.0, 90.0, 100.0)


def test_single_question(plan, tree, questions):
    res = eaee_evaluate(score_by_question({"q1": 73}), EVAL, plan, tree, questions[:1])
    assert res.post_score == 73.0


def test_summary_is_echoed(plan, tree, questions):
    def respond(config, messages):
        text = messages[-1].content
        if "Solve x +" in text:
            return "SCORE: 50\nADVANTAGE: a\nDISADVANTAGE: b"
        return "ADVANTAGE: concise\nDISADVANTAGE: shallow"

    res = eaee_evaluate(CallableBackend(respond), EVAL, plan, tree, questions[:2])
    assert (res.advantages, res.disadvantages) == ("concise", "shallow")


def test_call_count_and_prompt_contents(plan, tree, questions):
    seen = []

    def respond(config, messages):
        seen.append(messages[-1].content)
        return "SCORE: 50\nADVANTAGE: a\nDISADVANTAGE: b"

    eaee_evaluate(CallableBackend(respond), EVAL, plan, tree, questions[:4])
    assert len(seen) == 5  # four questions plus one summary
    assert "Solve x + 2 = 4." in seen[1]
    assert "Reference answer: 2" in seen[1]
    assert "Numerical Calculation" in seen[0]
    assert plan.knowledge_explanation in seen[0]


def test_empty_questions(plan, tree):
    with pytest.raises(EmptyQuestionSet):
        eaee_evaluate(score_by_question({}), EVAL, plan, tree, [])


def test_prompt_placeholders():
    assert set(prompts.placeholders("evaluate_question")) == {"skill_tree", "lesson_plan", "question", "evaluation_task"}
    assert set(prompts.placeholders("cidpp_judge")) == {"lessonplan"}


def test_judge_prompt_is_the_template(plan):
    text = judge_prompt(plan)
    head = prompts.template("cidpp_judge").split("{lessonplan}")[0]
    assert text.startswith(head)
    assert "[A]: [points]; [short analyzes]" in text
    assert plan.knowledge_explanation in text


# -- per-question verdicts -----------------------------------------------------


def test_parse_question_verdict():
    assert parse_question_verdict("SCORE: 85\nADVANTAGE: clear steps\nDISADVANTAGE: no visuals") == (
        85, "clear steps", "no visuals")


def test_parse_question_verdict_order_and_first_wins():
    text = "DISADVANTAGE: d1\nSCORE: 40\nADVANTAGE: a1\nSCORE: 99"
    assert parse_question_verdict(text) == (40, "a1", "d1")


def test_score_out_of_range():
    with pytest.raises(ScoreOutOfRange):
        parse_question_verdict("SCORE: 105\nADVANTAGE: a\nDISADVANTAGE: b")


def test_missing_disadvantage():
    with pytest.raises(VerdictParseError):
        parse_question_verdict("SCORE: 85\nADVANTAGE: a")


def test_empty_value_does_not_swallow_next_line():
    with pytest.raises(VerdictParseError):
        parse_question_verdict("SCORE: 85\nADVANTAGE:\nDISADVANTAGE: b")


QUESTION_MUTANTS = [
    "",
    "SCORE: 85",
    "ADVANTAGE: a\nDISADVANTAGE: b",
    "SCORE: eighty\nADVANTAGE: a\nDISADVANTAGE: b",
    "SCORE: 85 points maybe\nADVANTAGE: a\nDISADVANTAGE: b",
    "SCORE: -1\nADVANTAGE: a\nDISADVANTAGE: b",
    "SCORE: 100.5\nADVANTAGE: a\nDISADVANTAGE: b",
    "SCORE: 85\nADVANTAGE: \nDISADVANTAGE: b",
    "SCORE: 85\nADVANTAGE: a\nDISADVANTAGE:   ",
    "SCORE 85\nADVANTAGE: a\nDISADVANTAGE: b",
    "SCORE: 85\nADVANTAGES a\nDISADVANTAGE: b",
    "score= 85\nADVANTAGE: a\nDISADVANTAGE: b",
    "SCORE:\nADVANTAGE: a\nDISADVANTAGE: b",
    "SCORE: 8 5\nADVANTAGE: a\nDISADVANTAGE: b",
    "SCORE: 85/10\nADVANTAGE: a\nDISADVANTAGE: b",
    "SCORE: 1e2\nADVANTAGE: a\nDISADVANTAGE: b",
    "The score is 85. Advantage: a. Disadvantage: b.",
    "SCORE: 85; ADVANTAGE: a; DISADVANTAGE: b",
    "SCORE: 1000\nADVANTAGE: a\nDISADVANTAGE: b",
    "SCORE: 85%\nADVANTAGE: a\nDISADVANTAGE: b",
]


@pytest.mark.parametrize("text", QUESTION_MUTANTS)
def test_question_mutants_rejected(text):
    with pytest.raises(VerdictParseError):
        parse_question_verdict(text)


def test_question_mutant_corpus_size():
    assert len(QUESTION_MUTANTS) == 20


_text = st.text(alphabet=st.characters(whitelist_categories=("L", "N"), whitelist_characters=" ,."),
                min_size=1, max_size=30).map(str.strip).filter(bool)


@settings(max_examples=100)
@given(st.integers(0, 100), _text, _text)
def test_question_round_trip(score, adv, dis):
    assert parse_question_verdict(render_question_verdict(score, adv, dis)) == (score, adv, dis)


def test_parse_summary():
    assert parse_summary("ADVANTAGE: concise\nDISADVANTAGE: shallow") == ("concise", "shallow")
    with pytest.raises(VerdictParseError):
        parse_summary("ADVANTAGE: only")


# -- re-ask policy ---------------------------------------------------------------


def test_one_reask_then_success(plan, tree, questions):
    calls = []

    def respond(config, messages):
        calls.append(len(messages))
        if len(calls) == 1:
            return "I think it is decent."
        if len(calls) == 2:
            return "SCORE: 70\nADVANTAGE: a\nDISADVANTAGE: b"
        return "ADVANTAGE: x\nDISADVANTAGE: y"

    res = eaee_evaluate(CallableBackend(respond), EVAL, plan, tree, questions[:1])
    assert res.post_score == 70
    assert calls == [1, 3, 1]


def test_reask_then_hard_error(plan, tree, questions):
    calls = []

    def respond(config, messages):
        calls.append(1)
        return "no format here"

    with pytest.raises(VerdictParseError):
        eaee_evaluate(CallableBackend(respond), EVAL, plan, tree, questions[:1])
    assert len(calls) == 2


# -- properties ------------------------------------------------------------------


def test_mean_matches_oracle_1000_vectors(plan, tree, questions):
    rng = random.Random(1234)
    for _ in range(1000):
        t = rng.randint(1, 10)
        vec = {f"q{i}": rng.randint(0, 100) for i in range(1, t + 1)}
        res = eaee_evaluate(score_by_question(vec), EVAL, plan, tree, questions[:t])
        oracle = float(Fraction(sum(vec.values()), t))
        assert abs(res.post_score - oracle) <= 1e-9


@settings(max_examples=50, deadline=None)
@given(st.permutations(list(range(10))), st.lists(st.integers(0, 100), min_size=10, max_size=10))
def test_order_independence(perm, raw):
    from planforge.domain import build_skill_tree
    from planforge.demo import demo_plan

    tree = build_skill_tree("t", [[3] * 5] * 5)
    qs = [TestQuestion(f"q{i}", f"Solve x + {i} = {2 * i}.", str(i), "custom") for i in range(1, 11)]
    scores = {f"q{i}": raw[i - 1] for i in range(1, 11)}
    base = eaee_evaluate(score_by_question(scores), EVAL, demo_plan(), tree, qs)
    shuffled = [qs[i] for i in perm]
    res = eaee_evaluate(score_by_question(scores), EVAL, demo_plan(), tree, shuffled)
    assert res.per_question_scores == tuple(base.per_question_scores[i] for i in perm)
    assert math.isclose(res.post_score, base.post_score, abs_tol=1e-9)


def test_concurrent_keeps_question_order(plan, tree, questions):
    scores = {f"q{i}": 10 * i for i in range(1, 11)}
    res = eaee_evaluate(score_by_question(scores), EVAL, plan, tree, questions, max_workers=4)
    assert res.per_question_scores == tuple(float(10 * i) for i in range(1, 11))


# -- rubric judge ----------------------------------------------------------------


def test_ciddp_canonical():
    assert parse_ciddp_verdict(CANONICAL) == (84, 87, 88, 87, 83)


def test_ciddp_multiline_and_brackets():
    text = "[A]: [84]; clear\n[B]:87 ; complete\n\n[C] : 88; deep\n[D]: 87; applied\n[E]: 83.5; targeted"
    assert parse_ciddp_verdict(text) == (84, 87, 88, 87, 83.5)


def test_ciddp_bound_by_label():
    text = "[B]: 87; complete [A]: 84; clear [C]: 88; deep [E]: 83; targeted [D]: 87; applied"
    assert parse_ciddp_verdict(text) == (84, 87, 88, 87, 83)


def test_ciddp_negative():
    with pytest.raises(ScoreOutOfRange):
        parse_ciddp_verdict(CANONICAL.replace("[A]: 84", "[A]: -5"))


def test_ciddp_missing_e():
    with pytest.raises(VerdictParseError):
        parse_ciddp_verdict(CANONICAL.split("[E]")[0])


def test_ciddp_ignores_format_echo():
    text = 'Format: "[A]: [points]; [short analyzes]"\n' + CANONICAL
    assert parse_ciddp_verdict(text) == (84, 87, 88, 87, 83)


CIDPP_MUTANTS = [
    "",
    CANONICAL.split("[E]")[0],
    CANONICAL.replace("[C]: 88;", "[C]: eighty-eight;"),
    CANONICAL.replace("[A]: 84;", "[A]: 84"),
    CANONICAL.replace("[D]: 87;", "[D]: 870;"),
    CANONICAL.replace("[B]: 87;", "[B]: ;"),
    CANONICAL.replace("[A]", "[F]"),
    CANONICAL.replace("[A]", "A"),
    CANONICAL.replace("[E]: 83;", "[E]: 101;"),
    CANONICAL + " [A]: 50; changed mind",
    CANONICAL.replace("[C]: 88;", "[C] 88;"),
    CANONICAL.replace("[B]: 87;", "[B]: 8 7;"),
    CANONICAL.replace("[D]: 87;", "[D]: high;"),
    "Clarity 84, Integrity 87, Depth 88, Practicality 87, Pertinence 83",
    CANONICAL.replace("[E]: 83;", "[E]: -0.5;"),
    CANONICAL.replace("[A]: 84;", "[A]: [points]; [short analyzes]"),
    "[A]: 84; [B]: 87; [C]: 88; [D]: 87;",
    CANONICAL.replace("[C]: 88;", "[C]: 88/100;"),
    CANONICAL.replace(";", ","),
    CANONICAL.replace("[B]: 87;", "[b]: 87;"),
]


@pytest.mark.parametrize("text", CIDPP_MUTANTS)
def test_ciddp_mutants_rejected(text):
    with pytest.raises(VerdictParseError):
        parse_ciddp_verdict(text)


def test_ciddp_mutant_corpus_size():
    assert len(CIDPP_MUTANTS) == 20


_points = st.one_of(st.integers(0, 100), st.integers(0, 1000).map(lambda x: x / 10))


@settings(max_examples=100)
@given(st.tuples(_points, _points, _points, _points, _points))
def test_ciddp_round_trip(values):
    assert parse_ciddp_verdict(render_ciddp_verdict(values)) == tuple(float(v) for v in values)


def test_judge_overall_optional():
    assert parse_judge_overall(CANONICAL) is None
    assert parse_judge_overall(CANONICAL + "\nOverall score: 88") == 88


def test_ciddp_assess_aggregate(plan):
    seen = []

    def respond(config, messages):
        seen.append(messages[-1].content)
        return render_ciddp_verdict((84.1, 87.5, 88.9, 87.8, 83.7))

    score = ciddp_assess(CallableBackend(respond), JUDGE, plan)
    assert score.dimensions == (84.1, 87.5, 88.9, 87.8, 83.7)
    expected = float(sum(Fraction(str(v)) for v in (84.1, 87.5, 88.9, 87.8, 83.7)) / 5)
    assert score.aggregate == pytest.approx(expected, abs=1e-9)
    assert round(score.aggregate, 1) == 86.4
    assert seen == [judge_prompt(plan)]
    out = format_ciddp(score)
    for label in ("Clarity", "Integrity", "Depth", "Practicality", "Pertinence", "Aggregate: 86.4"):
        assert label in out


def test_ciddp_reask_then_error(plan):
    calls = []

    def respond(config, messages):
        calls.append(1)
        return "[A]: 84; only one"

    with pytest.raises(VerdictParseError):
        ciddp_assess(CallableBackend(respond), JUDGE, plan)
    assert len(calls) == 2


def test_question_prompt_includes_tree(plan, tree, questions):
    text = question_prompt(plan, tree, questions[0])
    assert "Numerical Calculation: 3.0/5" in text
