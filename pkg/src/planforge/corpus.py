"""Test-question loading (GSM8K JSONL, Algebra JSON) and seeded sampling.

Sampling uses SplitMix64 with a partial Fisher-Yates shuffle, implemented
here rather than taken from :mod:`random` so the drawn questions are pinned
by the algorithm itself and do not depend on the Python or numpy version.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Sequence, TypeVar

from .domain import TestQuestion
from .errors import DomainError, EmptyCorpus, ParseError, SampleTooLarge

T = TypeVar("T")

FORMATS = ("gsm8k", "algebra")
GSM8K_MARKER = "####"
_MASK64 = (1 << 64) - 1


class SplitMix64:
    """SplitMix64 generator (Steele, Lea and Flood, 2014)."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), by rejection to avoid modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n


def sample_questions(questions: Sequence[T], t: int, seed: int) -> list[T]:
    """Draw ``t`` items without replacement, deterministically from ``seed``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t > len(questions):
        raise SampleTooLarge(f"cannot sample {t} from {len(questions)} questions")
    rng = SplitMix64(seed)
    pool = list(questions)
    for i in range(t):
        j = i + rng.below(len(pool) - i)
        pool[i], pool[j] = pool[j], pool[i]
    return pool[:t]


def _load_gsm8k(text: str, name: str) -> list[TestQuestion]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            question, answer = rec["question"], rec["answer"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"{name}:{lineno}: not a {{question, answer}} record ({exc})") from exc
        if GSM8K_MARKER not in answer:
            raise ParseError(f"{name}:{lineno}: answer has no '{GSM8K_MARKER}' marker")
        reference = answer.rsplit(GSM8K_MARKER, 1)[1].strip()
        try:
            out.append(TestQuestion(str(rec.get("id", f"gsm8k-{lineno}")), question, reference, "gsm8k"))
        except DomainError as exc:
            raise ParseError(f"{name}:{lineno}: {exc}") from exc
    return out


def _load_algebra(text: str, name: str) -> list[TestQuestion]:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{name}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    if not isinstance(data, list):
        raise ParseError(f"{name}: algebra corpus must be a JSON array")
    out = []
    for i, rec in enumerate(data):
        if not isinstance(rec, dict):
            raise ParseError(f"{name}: record {i} is not an object")
        problem = rec.get("problem", rec.get("equation"))
        solution = rec.get("solution")
        if not isinstance(problem, str) or not isinstance(solution, str):
            raise ParseError(f"{name}: record {i} needs string 'problem' and 'solution' fields")
        try:
            out.append(TestQuestion(str(rec.get("id", f"algebra-{i}")), problem, solution, "algebra"))
        except DomainError as exc:
            raise ParseError(f"{name}: record {i}: {exc}") from exc
    return out


def load_questions(path, format: str) -> list[TestQuestion]:
    if format not in FORMATS:
        raise ValueError(f"unknown corpus format {format!r}; expected one of {FORMATS}")
    p = Path(path)
    text = p.read_text(encoding="utf-8")
    questions = _load_gsm8k(text, p.name) if format == "gsm8k" else _load_algebra(text, p.name)
    if not questions:
        raise EmptyCorpus(f"{p.name}: no questions")
    return questions


def bundled_corpus_path(format: str = "algebra") -> Path:
    name = {"algebra": "algebra_sample.json", "gsm8k": "gsm8k_sample.jsonl"}[format]
    return Path(str(resources.files("planforge").joinpath(f"data/{name}")))
