"""Deterministic stand-in agents for demos and tests.

:func:`monotone_oracle` returns a backend in which every plan carries a
"Quality level N" tag. The optimizer writes plans one level above the best
level it sees in its prompt, and the evaluator scores a plan
``initial + step * level`` on every question. A run therefore improves by
exactly ``step`` per round, which makes the optimization loop checkable by
hand.
"""

from __future__ import annotations

import re
from typing import Sequence

from .backend import AgentConfig, CallableBackend, ChatMessage
from .domain import ExampleItem, LessonPlan

_LEVEL = re.compile(r"Quality level (\d+)")


def plan_text(level: int, variant: int = 1) -> str:
    return (
        "KNOWLEDGE:\n"
        f"Quality level {level}. A linear equation balances two expressions; apply the same inverse "
        f"operation to both sides until the unknown stands alone (variant {variant}).\n"
        "EXAMPLE 1:\nSolve 3x + 4 = 19.\n"
        "SOLUTION:\nSubtract 4 from both sides to get 3x = 15, then divide by 3: x = 5.\n"
        "EXAMPLE 2:\nA number doubled and increased by 7 gives 21. Find it.\n"
        "SOLUTION:\nLet n be the number. 2n + 7 = 21, so 2n = 14 and n = 7."
    )


def demo_plan(level: int = 0, plan_id: str = "initial", topic: str = "algebraic equations") -> LessonPlan:
    return LessonPlan(
        id=plan_id,
        topic=topic,
        knowledge_explanation=(
            f"Quality level {level}. A linear equation balances two expressions; apply the same "
            "inverse operation to both sides until the unknown stands alone."
        ),
        examples=(
            ExampleItem("Solve 3x + 4 = 19.", "Subtract 4 from both sides to get 3x = 15, then divide by 3: x = 5."),
        ),
    )


def _levels(messages: Sequence[ChatMessage]) -> list[int]:
    return [int(x) for m in messages for x in _LEVEL.findall(m.content)]


def monotone_oracle(initial: float = 60.0, step: float = 5.0) -> CallableBackend:
    def respond(config: AgentConfig, messages: Sequence[ChatMessage]) -> str:
        if config.role == "optimizer":
            found = _levels(messages)
            level = max(found) + 1 if found else 0
            variant = re.search(r"candidate (\d+) of", messages[-1].content)
            return plan_text(level, int(variant.group(1)) if variant else 1)
        if config.role == "evaluator":
            found = _levels(messages)
            score = min(100.0, initial + step * (max(found) if found else 0))
            return f"SCORE: {score:g}\nADVANTAGE: steps are explicit\nDISADVANTAGE: needs harder examples"
        if config.role == "analyst":
            return "EXPLANATION: Check each step by substituting the result back into the equation."
        return "[A]: 80; clear [B]: 80; complete [C]: 80; deep [D]: 80; practical [E]: 80; targeted"

    return CallableBackend(respond)
