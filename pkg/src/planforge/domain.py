"""Value types shared across the pipeline and their JSON codecs.

Every type here is a frozen dataclass; collections are stored as tuples so
instances can be shared between threads without copying. ``to_dict`` /
``from_dict`` use the on-disk field names (those names are part of the file
format and must not change).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Optional, Sequence

from .errors import DomainError, EmptyTopic, IndexOutOfRange, LevelOutOfRange, ShapeError

ABILITY_NAMES: tuple[str, ...] = (
    "Numerical Calculation",
    "Abstract Thinking",
    "Logical Reasoning",
    "Analogy Association",
    "Spatial Imagination",
)

# Default sub-dimension labels; free text, overridable per tree.
DEFAULT_SUBNODE_LABELS: dict[str, tuple[str, ...]] = {
    "Numerical Calculation": (
        "Addition and subtraction",
        "Multiplication and division",
        "Fractions and decimals",
        "Order of operations",
        "Estimation and checking",
    ),
    "Abstract Thinking": (
        "Symbols and notation",
        "Concept of a variable",
        "Generalizing patterns",
        "Manipulating expressions",
        "Modeling with equations",
    ),
    "Logical Reasoning": (
        "Step-by-step deduction",
        "Justifying each step",
        "Verifying solutions",
        "Case analysis",
        "Spotting invalid steps",
    ),
    "Analogy Association": (
        "Recognizing problem types",
        "Transferring methods",
        "Linking representations",
        "Real-world connections",
        "Cross-topic connections",
    ),
    "Spatial Imagination": (
        "Reading graphs",
        "Number line reasoning",
        "Geometric figures",
        "Coordinate plane",
        "Visual models of quantities",
    ),
}

LEVEL_MIN, LEVEL_MAX = 1, 5
PROB_MIN, PROB_MAX = 0.01, 0.99
CIDPP_DIMENSIONS: tuple[str, ...] = ("clarity", "integrity", "depth", "practicality", "pertinence")
QUESTION_SOURCES = ("gsm8k", "algebra", "custom")


def _check_score(name: str, value: float) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool) or not (0.0 <= value <= 100.0):
        raise DomainError(f"{name} must be a number in [0, 100], got {value!r}")


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


# ---------------------------------------------------------------------------
# Skill tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SubNode:
    label: str
    level: int

    def __post_init__(self) -> None:
        if not _is_int(self.level) or not (LEVEL_MIN <= self.level <= LEVEL_MAX):
            raise LevelOutOfRange(f"sub-node level must be an integer in [1, 5], got {self.level!r}")


@dataclass(frozen=True)
class AbilityNode:
    name: str
    sub_nodes: tuple[SubNode, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sub_nodes", tuple(self.sub_nodes))
        if self.name not in ABILITY_NAMES:
            raise DomainError(f"unknown ability {self.name!r}")
        if len(self.sub_nodes) != 5:
            raise ShapeError(f"ability {self.name!r} needs exactly 5 sub-nodes, got {len(self.sub_nodes)}")

    @property
    def mean_level(self) -> float:
        return sum(s.level for s in self.sub_nodes) / len(self.sub_nodes)


@dataclass(frozen=True)
class SkillTree:
    """Group-level ability model: a topic root with five ability branches."""

    topic: str
    abilities: tuple[AbilityNode, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "abilities", tuple(self.abilities))
        if not isinstance(self.topic, str) or not self.topic.strip():
            raise EmptyTopic("skill tree topic must be non-empty")
        if len(self.abilities) != 5:
            raise ShapeError(f"skill tree needs exactly 5 abilities, got {len(self.abilities)}")
        names = tuple(a.name for a in self.abilities)
        if names != ABILITY_NAMES:
            raise DomainError(f"abilities must be {list(ABILITY_NAMES)} in order, got {list(names)}")

    @property
    def levels(self) -> list[list[int]]:
        return [[s.level for s in a.sub_nodes] for a in self.abilities]

    def to_dict(self) -> dict:
        return {
            "topic": self.topic,
            "abilities": [
                {"name": a.name, "sub_nodes": [{"label": s.label, "level": s.level} for s in a.sub_nodes]}
                for a in self.abilities
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SkillTree":
        try:
            abilities = [
                AbilityNode(a["name"], tuple(SubNode(s["label"], s["level"]) for s in a["sub_nodes"]))
                for a in data["abilities"]
            ]
            return cls(data["topic"], tuple(abilities))
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed skill tree document: {exc}") from exc


def build_skill_tree(
    topic: str,
    levels: Sequence[Sequence[int]],
    labels: Optional[dict[str, Sequence[str]]] = None,
) -> SkillTree:
    """Build a tree from a 5x5 level matrix (row i = ability i in canonical order)."""
    if not isinstance(topic, str) or not topic.strip():
        raise EmptyTopic("topic must be non-empty")
    rows = list(levels)
    if len(rows) != 5 or any(len(list(r)) != 5 for r in rows):
        raise ShapeError("levels must be a 5x5 matrix")
    for row in rows:
        for v in row:
            if not _is_int(v) or not (LEVEL_MIN <= v <= LEVEL_MAX):
                raise LevelOutOfRange(f"level {v!r} outside [1, 5]")
    labels = labels or {}
    abilities = []
    for name, row in zip(ABILITY_NAMES, rows):
        names = tuple(labels.get(name, DEFAULT_SUBNODE_LABELS[name]))
        if len(names) != 5:
            raise ShapeError(f"ability {name!r} needs 5 sub-node labels")
        abilities.append(AbilityNode(name, tuple(SubNode(lbl, lv) for lbl, lv in zip(names, row))))
    return SkillTree(topic, tuple(abilities))


def primary_score(tree: SkillTree, ability_index: int) -> float:
    """Mean sub-node level of one ability, in [1, 5]."""
    if not _is_int(ability_index) or not (0 <= ability_index < len(tree.abilities)):
        raise IndexOutOfRange(f"ability index must be in 0..4, got {ability_index!r}")
    return tree.abilities[ability_index].mean_level


def render_skill_tree_fragment(tree: SkillTree) -> str:
    lines = [
        f"Teaching topic: {tree.topic}",
        "Student group Skill-Tree (ability levels on a 1-5 scale):",
    ]
    for i, ability in enumerate(tree.abilities):
        lines.append(f"- {ability.name}: {primary_score(tree, i):.1f}/5")
        for sub in ability.sub_nodes:
            lines.append(f"    * {sub.label}: {sub.level}/5")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Lesson plans
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ErrorPoint:
    mistake_id: str
    description: str
    probability: float
    explanation: str

    def __post_init__(self) -> None:
        if not (PROB_MIN <= self.probability <= PROB_MAX):
            raise DomainError(f"error point probability {self.probability!r} outside [0.01, 0.99]")
        if not self.explanation.strip():
            raise DomainError("error point explanation must be non-empty")

    def to_dict(self) -> dict:
        return {
            "mistake_id": self.mistake_id,
            "description": self.description,
            "probability": self.probability,
            "explanation": self.explanation,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ErrorPoint":
        return cls(data["mistake_id"], data["description"], float(data["probability"]), data["explanation"])


@dataclass(frozen=True)
class ExampleItem:
    statement: str
    worked_solution: str
    error_points: tuple[ErrorPoint, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "error_points", tuple(self.error_points))
        probs = [p.probability for p in self.error_points]
        if any(a < b for a, b in zip(probs, probs[1:])):
            raise DomainError("error points must be sorted by probability, descending")

    def to_dict(self) -> dict:
        return {
            "statement": self.statement,
            "worked_solution": self.worked_solution,
            "error_points": [p.to_dict() for p in self.error_points],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExampleItem":
        return cls(
            data["statement"],
            data["worked_solution"],
            tuple(ErrorPoint.from_dict(p) for p in data.get("error_points", [])),
        )


@dataclass(frozen=True)
class LessonPlan:
    id: str
    topic: str
    knowledge_explanation: str
    examples: tuple[ExampleItem, ...] = ()
    parent_id: Optional[str] = None
    round: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "examples", tuple(self.examples))
        if not self.id:
            raise DomainError("lesson plan id must be non-empty")
        if not self.knowledge_explanation.strip():
            raise DomainError("knowledge_explanation must be non-empty")
        if not _is_int(self.round) or self.round < 0:
            raise DomainError(f"round must be a non-negative integer, got {self.round!r}")
        if (self.round == 0) != (self.parent_id is None):
            raise DomainError("round 0 plans have no parent; later rounds must name one")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "topic": self.topic,
            "knowledge_explanation": self.knowledge_explanation,
            "examples": [e.to_dict() for e in self.examples],
            "parent_id": self.parent_id,
            "round": self.round,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LessonPlan":
        try:
            return cls(
                id=data["id"],
                topic=data["topic"],
                knowledge_explanation=data["knowledge_explanation"],
                examples=tuple(ExampleItem.from_dict(e) for e in data.get("examples", [])),
                parent_id=data.get("parent_id"),
                round=data.get("round", 0),
            )
        except (KeyError, TypeError) as exc:
            raise DomainError(f"malformed lesson plan document: {exc}") from exc


def render_plan_text(plan: LessonPlan) -> str:
    """Plain-text form of a plan as shown to agents.

    Uses the same section markers the plan parser accepts, so a rendered plan
    (minus its error-prone points) parses back to the same content.
    """
    parts = ["KNOWLEDGE:", plan.knowledge_explanation.strip()]
    for i, ex in enumerate(plan.examples, 1):
        parts += [f"EXAMPLE {i}:", ex.statement.strip(), "SOLUTION:", ex.worked_solution.strip()]
        if ex.error_points:
            parts.append("ERROR-PRONE POINTS:")
            for j, p in enumerate(ex.error_points, 1):
                parts.append(f"{j}. [{p.probability:.2f}] {p.description}: {p.explanation.strip()}")
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# Questions and scores
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestQuestion:
    __test__ = False  # keep pytest from collecting this class

    id: str
    statement: str
    reference_answer: str
    source: str = "custom"

    def __post_init__(self) -> None:
        if not self.statement.strip() or not self.reference_answer.strip():
            raise DomainError(f"question {self.id!r} needs a statement and a reference answer")
        if self.source not in QUESTION_SOURCES:
            raise DomainError(f"unknown question source {self.source!r}")

    def to_dict(self) -> dict:
        return {"id": self.id, "statement": self.statement, "reference_answer": self.reference_answer, "source": self.source}

    @classmethod
    def from_dict(cls, data: dict) -> "TestQuestion":
        return cls(data["id"], data["statement"], data["reference_answer"], data.get("source", "custom"))


@dataclass(frozen=True)
class EvalResult:
    post_score: float
    advantages: str
    disadvantages: str
    per_question_scores: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_question_scores", tuple(self.per_question_scores))
        _check_score("post_score", self.post_score)
        for s in self.per_question_scores:
            _check_score("per-question score", s)
        if not self.per_question_scores:
            raise DomainError("EvalResult needs at least one per-question score")
        mean = math.fsum(self.per_question_scores) / len(self.per_question_scores)
        if abs(mean - self.post_score) > 1e-9:
            raise DomainError(f"post_score {self.post_score} is not the mean {mean} of per-question scores")

    def to_dict(self) -> dict:
        return {
            "post_score": self.post_score,
            "advantages": self.advantages,
            "disadvantages": self.disadvantages,
            "per_question_scores": list(self.per_question_scores),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EvalResult":
        return cls(data["post_score"], data["advantages"], data["disadvantages"], tuple(data["per_question_scores"]))


UNIFORM_WEIGHTS: tuple[float, ...] = (0.2,) * 5


def weighted_mean(values: Sequence[float], weights: Sequence[float]) -> float:
    return math.fsum(v * w for v, w in zip(values, weights)) / math.fsum(weights)


@dataclass(frozen=True)
class CiddpScore:
    """Five-dimension rubric verdict.

    ``aggregate`` is our weighted mean of the five dimensions. ``judge_overall``
    holds an overall number only when the judge volunteered one; the two are
    not assumed to agree.
    """

    clarity: float
    integrity: float
    depth: float
    practicality: float
    pertinence: float
    aggregate: float
    judge_overall: Optional[float] = None
    weights: tuple[float, ...] = field(default=UNIFORM_WEIGHTS)

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", tuple(self.weights))
        for name in CIDPP_DIMENSIONS:
            _check_score(name, getattr(self, name))
        _check_score("aggregate", self.aggregate)
        if self.judge_overall is not None:
            _check_score("judge_overall", self.judge_overall)
        if len(self.weights) != 5 or any(w < 0 for w in self.weights) or sum(self.weights) <= 0:
            raise DomainError("weights must be five non-negative numbers with a positive sum")
        expected = weighted_mean(self.dimensions, self.weights)
        if abs(expected - self.aggregate) > 1e-9:
            raise DomainError(f"aggregate {self.aggregate} != weighted mean {expected}")

    @classmethod
    def from_dimensions(
        cls,
        values: Iterable[float],
        weights: Optional[Sequence[float]] = None,
        judge_overall: Optional[float] = None,
    ) -> "CiddpScore":
        vals = tuple(float(v) for v in values)
        if len(vals) != 5:
            raise ShapeError("CIDPP needs exactly five dimension values")
        w = tuple(float(x) for x in (weights or UNIFORM_WEIGHTS))
        return cls(*vals, aggregate=weighted_mean(vals, w), judge_overall=judge_overall, weights=w)

    @property
    def dimensions(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in CIDPP_DIMENSIONS)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {name: getattr(self, name) for name in CIDPP_DIMENSIONS}
        d["aggregate"] = self.aggregate
        d["judge_overall"] = self.judge_overall
        d["weights"] = list(self.weights)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "CiddpScore":
        return cls(
            *(data[name] for name in CIDPP_DIMENSIONS),
            aggregate=data["aggregate"],
            judge_overall=data.get("judge_overall"),
            weights=tuple(data.get("weights", UNIFORM_WEIGHTS)),
        )
