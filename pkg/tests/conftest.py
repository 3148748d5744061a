import re

import pytest

from planforge.backend import AgentConfig, CallableBackend
from planforge.demo import demo_plan
from planforge.domain import ExampleItem, LessonPlan, TestQuestion, build_skill_tree

UNIFORM3 = [[3] * 5 for _ in range(5)]


@pytest.fixture
def tree():
    return build_skill_tree("algebraic equations", UNIFORM3)


@pytest.fixture
def plan():
    return LessonPlan(
        id="p0",
        topic="algebraic equations",
        knowledge_explanation="Do the same operation to both sides of an equation.",
        examples=(
            ExampleItem("Solve 2x + 1 = 7.", "2x = 6, so x = 3."),
            ExampleItem("Solve x/4 = 2.", "Multiply by 4: x = 8."),
        ),
    )


@pytest.fixture
def questions():
    return [TestQuestion(f"q{i}", f"Solve x + {i} = {2 * i}.", str(i), "custom") for i in range(1, 11)]


@pytest.fixture
def configs():
    return {role: AgentConfig(role) for role in ("evaluator", "optimizer", "analyst", "judge")}


@pytest.fixture
def initial_plan():
    return demo_plan(0)


def score_by_question(scores: dict[str, float]) -> CallableBackend:
    """Evaluator that scores each question by its id (looked up in the prompt)."""

    def respond(config, messages):
        text = messages[-1].content
        m = re.search(r"Solve x \+ (\d+) =", text)
        if m:
            return f"SCORE: {scores['q' + m.group(1)]}\nADVANTAGE: a{m.group(1)}\nDISADVANTAGE: d{m.group(1)}"
        return "ADVANTAGE: merged strengths\nDISADVANTAGE: merged weaknesses"

    return CallableBackend(respond)
