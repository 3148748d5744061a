"""Live smoke test against a completion-compatible endpoint.

Skipped unless PLANFORGE_LIVE=1 and PLANFORGE_API_KEY are set. Optional
PLANFORGE_BASE_URL and PLANFORGE_LIVE_MODEL pick the endpoint and model.
"""

import os

import pytest

from planforge.backend import AgentConfig, HttpBackend, user
from planforge.demo import demo_plan
from planforge.domain import TestQuestion, build_skill_tree
from planforge.evaluation import parse_question_verdict, question_prompt

pytestmark = [
    pytest.mark.live,
    pytest.mark.skipif(
        os.environ.get("PLANFORGE_LIVE") != "1" or not os.environ.get("PLANFORGE_API_KEY"),
        reason="set PLANFORGE_LIVE=1 and PLANFORGE_API_KEY to run",
    ),
]


def test_10_live_question_call(capsys):
    cfg = AgentConfig("evaluator", model_id=os.environ.get("PLANFORGE_LIVE_MODEL", "gpt-4o-mini"))
    tree = build_skill_tree("algebraic equations", [[3] * 5] * 5)
    question = TestQuestion("live-1", "Solve 5x - 3 = 12.", "3", "custom")
    text = HttpBackend().complete(cfg, [user(question_prompt(demo_plan(0), tree, question))])
    score, _, _ = parse_question_verdict(text)
    with capsys.disabled():
        print(f"\n[ACCEPTANCE 10] PASS: live SCORE {score:g}")
    assert 0 <= score <= 100
