"""Regenerate src/planforge/data/algebra_sample.json.

The file is a synthetic stand-in shaped like the Algebra dataset (222
equation word problems with worked solutions). It exists so the pipeline
runs offline; the problems are template-generated, not the real dataset.
"""

import json
from pathlib import Path

from planforge.corpus import SplitMix64

N_RECORDS = 222
OUT = Path(__file__).resolve().parents[1] / "src" / "planforge" / "data" / "algebra_sample.json"
NAMES = ["Ana", "Ben", "Chen", "Dara", "Eli", "Fatima", "Goran", "Hana", "Ivan", "Jia"]


def linear(rng):
    a, x, b = rng.below(8) + 2, rng.below(19) - 6, rng.below(20) + 1
    c = a * x + b
    return (f"Solve for x: {a}x + {b} = {c}.",
            f"Subtract {b} from both sides: {a}x = {c - b}. Divide both sides by {a}: x = {x}.")


def bracket(rng):
    a, x, b = rng.below(6) + 2, rng.below(15) + 1, rng.below(9) + 1
    c = a * (x - b)
    return (f"Solve for x: {a}(x - {b}) = {c}.",
            f"Divide both sides by {a}: x - {b} = {x - b}. Add {b} to both sides: x = {x}.")


def number(rng):
    a, x, b = rng.below(7) + 2, rng.below(30) + 1, rng.below(25) + 1
    c = a * x + b
    return (f"A number is multiplied by {a} and then increased by {b}. The result is {c}. What is the number?",
            f"Let the number be n. Then {a}n + {b} = {c}, so {a}n = {c - b} and n = {x}.")


def sharing(rng):
    i, j = rng.below(len(NAMES)), rng.below(len(NAMES) - 1)
    p, q = NAMES[i], [n for n in NAMES if n != NAMES[i]][j]
    a, x = rng.below(4) + 2, rng.below(20) + 3
    total = (a + 1) * x
    return (f"{p} has {a} times as many stickers as {q}. Together they have {total} stickers. "
            f"How many stickers does {q} have?",
            f"Let {q} have s stickers, so {p} has {a}s. Then s + {a}s = {total}, {a + 1}s = {total}, s = {x}.")


def consecutive(rng):
    x = rng.below(60) + 1
    return (f"The sum of two consecutive integers is {2 * x + 1}. What is the smaller integer?",
            f"Let the integers be n and n + 1. Then 2n + 1 = {2 * x + 1}, so 2n = {2 * x} and n = {x}.")


def fraction(rng):
    a, k, b = rng.below(5) + 2, rng.below(9) + 1, rng.below(10) + 1
    x = a * k
    return (f"Solve for x: x/{a} + {b} = {k + b}.",
            f"Subtract {b} from both sides: x/{a} = {k}. Multiply both sides by {a}: x = {x}.")


TEMPLATES = [linear, bracket, number, sharing, consecutive, fraction]


def main():
    rng = SplitMix64(20240101)
    records = []
    for i in range(N_RECORDS):
        problem, solution = TEMPLATES[i % len(TEMPLATES)](rng)
        records.append({"id": f"alg-{i:03d}", "problem": problem, "solution": solution})
    OUT.write_text(json.dumps(records, indent=1) + "\n", encoding="utf-8")
    print(f"wrote {len(records)} records to {OUT}")


if __name__ == "__main__":
    main()
