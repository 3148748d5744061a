"""Prompt templates stored as editable ``.txt`` assets.

Placeholders use ``{name}`` syntax. Substitution is plain string replacement
(no ``str.format``), so braces inside substituted values are left alone.
"""

from __future__ import annotations

import re
from importlib import resources

_PLACEHOLDER = re.compile(r"\{([a-z_]+)\}")


def template(name: str) -> str:
    return resources.files(__package__).joinpath(f"{name}.txt").read_text(encoding="utf-8")


def placeholders(name: str) -> set[str]:
    return set(_PLACEHOLDER.findall(template(name)))


def render(name: str, **values) -> str:
    text = template(name)
    missing = placeholders(name) - set(values)
    if missing:
        raise KeyError(f"prompt {name!r} missing values for {sorted(missing)}")
    # single pass so a value containing "{other}" is never re-substituted
    return _PLACEHOLDER.sub(lambda m: str(values[m.group(1)]) if m.group(1) in values else m.group(0), text)
