"""Error-prone point annotation backed by a common-mistakes database.

Retrieval is deterministic: every mistake gets a probability from its base
rate scaled by how many of its knowledge tags the student group is weak in,
and the top three per example are kept. The analyst agent only writes the
explanation text for each selected mistake.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional

from . import prompts
from .backend import AgentConfig, Backend, ask_parsed, user
from .domain import (
    PROB_MAX,
    PROB_MIN,
    ErrorPoint,
    ExampleItem,
    LessonPlan,
    SkillTree,
    render_skill_tree_fragment,
)
from .errors import ExplanationParseError, InsufficientMistakes, InvariantViolation, ParseError

log = logging.getLogger(__name__)

POINTS_PER_EXAMPLE = 3
DEFAULT_WEAKNESS_THRESHOLD = 3.0

EXPLANATION_REASK = "Your reply did not follow the required format. Reply with one line: EXPLANATION: <text>."


@dataclass(frozen=True)
class CommonMistake:
    id: str
    group: int
    description: str
    tags: frozenset[str]
    base_probability: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "tags", frozenset(self.tags))
        if not self.id:
            raise ParseError("mistake id must be non-empty")
        if isinstance(self.group, bool) or not isinstance(self.group, int) or not (1 <= self.group <= 5):
            raise ParseError(f"mistake {self.id}: group must be an integer in [1, 5]")
        if not self.tags:
            raise ParseError(f"mistake {self.id}: tags must be non-empty")
        if not isinstance(self.base_probability, (int, float)) or not (0.0 < self.base_probability < 1.0):
            raise ParseError(f"mistake {self.id}: base_probability must lie in (0, 1)")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "group": self.group,
            "description": self.description,
            "tags": sorted(self.tags),
            "base_probability": self.base_probability,
        }


@dataclass(frozen=True)
class MistakeDatabase:
    mistakes: tuple[CommonMistake, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "mistakes", tuple(self.mistakes))
        seen: set[str] = set()
        for m in self.mistakes:
            if m.id in seen:
                raise ParseError(f"duplicate mistake id {m.id!r}")
            seen.add(m.id)

    def __len__(self) -> int:
        return len(self.mistakes)

    def groups(self) -> dict[int, int]:
        counts: dict[int, int] = {}
        for m in self.mistakes:
            counts[m.group] = counts.get(m.group, 0) + 1
        return dict(sorted(counts.items()))


def parse_cmd(data) -> MistakeDatabase:
    if not isinstance(data, list):
        raise ParseError("mistake database must be a JSON list")
    out = []
    for i, rec in enumerate(data):
        try:
            out.append(
                CommonMistake(
                    id=rec["id"],
                    group=rec["group"],
                    description=rec["description"],
                    tags=frozenset(rec["tags"]),
                    base_probability=rec["base_probability"],
                )
            )
        except (KeyError, TypeError) as exc:
            raise ParseError(f"mistake record {i}: {exc!r}") from exc
    return MistakeDatabase(tuple(out))


def _bundled_text() -> str:
    return resources.files("planforge").joinpath("data/mistakes.json").read_text(encoding="utf-8")


def load_cmd(path=None) -> MistakeDatabase:
    """Load a mistake database; ``None`` loads the bundled 50-entry default."""
    text = Path(path).read_text(encoding="utf-8") if path is not None else _bundled_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"mistake database is not valid JSON: {exc}") from exc
    db = parse_cmd(data)
    if path is None:
        if len(db) != 50 or db.groups() != {g: 10 for g in range(1, 6)}:
            raise InvariantViolation(f"bundled database must hold 5 groups of 10, found {db.groups()}")
    return db


def ability_tags() -> dict[str, str]:
    text = resources.files("planforge").joinpath("data/ability_tags.json").read_text(encoding="utf-8")
    return json.loads(text)


def derive_kb_tags(
    tree: SkillTree,
    threshold: float = DEFAULT_WEAKNESS_THRESHOLD,
    mapping: Optional[Mapping[str, str]] = None,
) -> frozenset[str]:
    """Tags of the abilities whose mean level is at or below ``threshold``."""
    mapping = mapping or ability_tags()
    return frozenset(mapping[a.name] for a in tree.abilities if a.mean_level <= threshold)


def mistake_probability(mistake: CommonMistake, kb_tags: Iterable[str]) -> float:
    overlap = len(mistake.tags & frozenset(kb_tags))
    p = mistake.base_probability * overlap / len(mistake.tags)
    return min(max(p, PROB_MIN), PROB_MAX)


def retrieve_top_mistakes(
    cmd: MistakeDatabase,
    tree: SkillTree,
    example: ExampleItem,
    threshold: float = DEFAULT_WEAKNESS_THRESHOLD,
) -> list[tuple[CommonMistake, float]]:
    # example is unused by the scoring rule today; kept so per-example signals can slot in
    if len(cmd) < POINTS_PER_EXAMPLE:
        raise InsufficientMistakes(f"need at least {POINTS_PER_EXAMPLE} mistakes, database has {len(cmd)}")
    kb = derive_kb_tags(tree, threshold)
    scored = [(m, mistake_probability(m, kb)) for m in cmd.mistakes]
    scored.sort(key=lambda mp: (-mp[1], mp[0].id))
    return scored[:POINTS_PER_EXAMPLE]


_EXPLANATION = re.compile(r"EXPLANATION\s*\**\s*:\s*\**(.*)", re.IGNORECASE | re.DOTALL)


def parse_explanation(text: str) -> str:
    m = _EXPLANATION.search(text or "")
    if not m or not m.group(1).strip():
        raise ExplanationParseError("reply has no non-empty EXPLANATION")
    return m.group(1).strip()


def explanation_prompt(tree: SkillTree, example: ExampleItem, mistake: CommonMistake, probability: float) -> str:
    return prompts.render(
        "analyst_explain",
        skill_tree=render_skill_tree_fragment(tree),
        example=example.statement.strip(),
        solution=example.worked_solution.strip(),
        mistake=mistake.description,
        probability=f"{probability:.2f}",
    )


def aaea_annotate(
    backend: Backend,
    analyst_config: AgentConfig,
    plan: LessonPlan,
    cmd: MistakeDatabase,
    tree: SkillTree,
    threshold: float = DEFAULT_WEAKNESS_THRESHOLD,
) -> LessonPlan:
    """Return a copy of ``plan`` whose examples each carry three error points.

    Existing error points are replaced, so annotating twice is harmless.
    """
    if not plan.examples:
        log.warning("plan %s has no examples; nothing to annotate", plan.id)
        return plan
    examples = []
    for example in plan.examples:
        points = []
        for mistake, p in retrieve_top_mistakes(cmd, tree, example, threshold):
            msgs = [user(explanation_prompt(tree, example, mistake, p))]
            explanation = ask_parsed(backend, analyst_config, msgs, parse_explanation, EXPLANATION_REASK)
            points.append(ErrorPoint(mistake.id, mistake.description, p, explanation))
        examples.append(replace(example, error_points=tuple(points)))
    return replace(plan, examples=tuple(examples))

