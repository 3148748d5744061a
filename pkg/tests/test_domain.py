import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from planforge.domain import (
    ABILITY_NAMES,
    CiddpScore,
    DomainError,
    ErrorPoint,
    EvalResult,
    ExampleItem,
    LessonPlan,
    SkillTree,
    build_skill_tree,
    primary_score,
    render_plan_text,
    render_skill_tree_fragment,
)
from planforge.errors import EmptyTopic, IndexOutOfRange, LevelOutOfRange, ShapeError

levels_st = st.lists(st.lists(st.integers(1, 5), min_size=5, max_size=5), min_size=5, max_size=5)
topic_st = st.text(min_size=1, max_size=30).filter(lambda s: s.strip())


def test_uniform_levels_give_mean_three():
    tree = build_skill_tree("algebraic equations", [[3] * 5] * 5)
    assert [primary_score(tree, i) for i in range(5)] == [3.0] * 5
    assert [a.name for a in tree.abilities] == list(ABILITY_NAMES)


def test_construction_echoes_levels():
    levels = [[1, 2, 3, 4, 5]] + [[3] * 5] * 4
    tree = build_skill_tree("algebraic equations", levels)
    assert [s.level for s in tree.abilities[0].sub_nodes] == [1, 2, 3, 4, 5]
    assert tree.levels == levels


@pytest.mark.parametrize("bad", [6, 0, -1, 2.5, True])
def test_level_out_of_range(bad):
    levels = [[3] * 5 for _ in range(5)]
    levels[2][4] = bad
    with pytest.raises(LevelOutOfRange):
        build_skill_tree("algebraic equations", levels)


@pytest.mark.parametrize("levels", [[[3] * 5] * 4, [[3] * 4] * 5, [[3] * 5] * 4 + [[3] * 6], []])
def test_shape_errors(levels):
    with pytest.raises(ShapeError):
        build_skill_tree("algebraic equations", levels)


def test_empty_topic():
    with pytest.raises(EmptyTopic):
        build_skill_tree("  ", [[3] * 5] * 5)


@pytest.mark.parametrize(
    "row, expected",
    [([3, 3, 3, 3, 3], 3.0), ([1, 2, 3, 4, 5], 3.0), ([2, 2, 3, 5, 5], 3.4)],
)
def test_primary_score(row, expected):
    tree = build_skill_tree("t", [row] + [[3] * 5] * 4)
    assert primary_score(tree, 0) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("idx", [-1, 5, 1.0])
def test_primary_score_index(idx, tree):
    with pytest.raises(IndexOutOfRange):
        primary_score(tree, idx)


@given(levels_st, st.randoms())
def test_primary_score_permutation_invariant(levels, rnd):
    tree = build_skill_tree("t", levels)
    shuffled = [row[:] for row in levels]
    for row in shuffled:
        rnd.shuffle(row)
    other = build_skill_tree("t", shuffled)
    assert all(primary_score(tree, i) == primary_score(other, i) for i in range(5))
    assert all(1 <= primary_score(tree, i) <= 5 for i in range(5))


def test_fragment_contents(tree):
    text = render_skill_tree_fragment(tree)
    assert "Numerical Calculation: 3.0/5" in text
    for name in ABILITY_NAMES:
        assert name in text
    assert text == render_skill_tree_fragment(tree)


def test_fragment_distinguishes_levels(tree):
    levels = tree.levels
    levels[4][2] = 4
    assert render_skill_tree_fragment(tree) != render_skill_tree_fragment(build_skill_tree(tree.topic, levels))


@given(topic_st, levels_st)
def test_build_accepts_valid_matrices(topic, levels):
    tree = build_skill_tree(topic, levels)
    assert tree.levels == levels
    assert SkillTree.from_dict(json.loads(json.dumps(tree.to_dict()))) == tree


@given(st.lists(st.lists(st.integers(-2, 8), min_size=4, max_size=6), min_size=4, max_size=6))
def test_build_rejects_exactly_invalid(levels):
    valid_shape = len(levels) == 5 and all(len(r) == 5 for r in levels)
    valid_values = all(1 <= v <= 5 for r in levels for v in r)
    if valid_shape and valid_values:
        assert build_skill_tree("t", levels).levels == levels
    else:
        with pytest.raises((ShapeError, LevelOutOfRange)):
            build_skill_tree("t", levels)


def test_tree_document_rejects_wrong_ability_order(tree):
    doc = tree.to_dict()
    doc["abilities"][0], doc["abilities"][1] = doc["abilities"][1], doc["abilities"][0]
    with pytest.raises(DomainError):
        SkillTree.from_dict(doc)


# -- lesson plans -------------------------------------------------------------

text_st = st.text(st.characters(blacklist_categories=("Cs",)), min_size=1, max_size=40).filter(lambda s: s.strip())


@st.composite
def plans(draw):
    def example():
        probs = sorted(draw(st.lists(st.floats(0.01, 0.99), min_size=3, max_size=3)), reverse=True)
        points = tuple(ErrorPoint(f"CM{i}", draw(text_st), p, draw(text_st)) for i, p in enumerate(probs))
        return ExampleItem(draw(text_st), draw(text_st), points if draw(st.booleans()) else ())

    rnd = draw(st.integers(0, 5))
    return LessonPlan(
        id=draw(text_st),
        topic=draw(text_st),
        knowledge_explanation=draw(text_st),
        examples=tuple(example() for _ in range(draw(st.integers(0, 3)))),
        parent_id=None if rnd == 0 else draw(text_st),
        round=rnd,
    )


@given(plans())
def test_plan_codec_round_trip(plan):
    assert LessonPlan.from_dict(json.loads(json.dumps(plan.to_dict()))) == plan


def test_plan_lineage_invariant():
    with pytest.raises(DomainError):
        LessonPlan("a", "t", "k", parent_id="x", round=0)
    with pytest.raises(DomainError):
        LessonPlan("a", "t", "k", parent_id=None, round=2)
    with pytest.raises(DomainError):
        LessonPlan("a", "t", "   ")


def test_plan_json_field_names(plan):
    assert list(plan.to_dict()) == ["id", "topic", "knowledge_explanation", "examples", "parent_id", "round"]
    assert list(plan.to_dict()["examples"][0]) == ["statement", "worked_solution", "error_points"]


def test_error_point_bounds_and_order():
    with pytest.raises(DomainError):
        ErrorPoint("m", "d", 0.995, "e")
    with pytest.raises(DomainError):
        ErrorPoint("m", "d", 0.5, " ")
    with pytest.raises(DomainError):
        ExampleItem("s", "w", (ErrorPoint("a", "d", 0.2, "e"), ErrorPoint("b", "d", 0.3, "e")))


def test_render_plan_text_lists_sections(plan):
    text = render_plan_text(plan)
    assert text.startswith("KNOWLEDGE:")
    assert "EXAMPLE 2:" in text and text.count("SOLUTION:") == 2


# -- scores ------------------------------------------------------------------


def test_eval_result_mean_invariant():
    EvalResult(90.0, "a", "d", (80, 90, 100))
    with pytest.raises(DomainError):
        EvalResult(91.0, "a", "d", (80, 90, 100))


def test_ciddp_aggregate_of_table_row():
    score = CiddpScore.from_dimensions((84.1, 87.5, 88.9, 87.8, 83.7))
    # independent: exact rational mean of the five values
    exact = sum(Fraction(str(v)) for v in (84.1, 87.5, 88.9, 87.8, 83.7)) / 5
    assert exact == Fraction("86.4")
    assert score.aggregate == pytest.approx(86.4, abs=1e-9)


def test_ciddp_weighted_aggregate():
    score = CiddpScore.from_dimensions((100, 0, 0, 0, 0), weights=(3, 1, 0, 0, 0))
    assert score.aggregate == pytest.approx(75.0)
    with pytest.raises(DomainError):
        CiddpScore(1, 2, 3, 4, 5, aggregate=10.0)


score_st = st.integers(0, 1000).map(lambda n: n / 10)


@given(st.lists(score_st, min_size=5, max_size=5), st.none() | score_st,
       st.lists(st.integers(1, 5), min_size=5, max_size=5))
def test_ciddp_codec_round_trip(values, overall, weights):
    score = CiddpScore.from_dimensions(values, weights=weights, judge_overall=overall)
    assert CiddpScore.from_dict(json.loads(json.dumps(score.to_dict()))) == score


@settings(max_examples=50)
@given(st.integers(0, 2**32))
def test_random_trees_round_trip(seed):
    rnd = random.Random(seed)
    levels = [[rnd.randint(1, 5) for _ in range(5)] for _ in range(5)]
    tree = build_skill_tree("t", levels)
    assert SkillTree.from_dict(tree.to_dict()) == tree
