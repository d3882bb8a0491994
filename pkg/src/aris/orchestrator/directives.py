"""Inline ``key: value`` directives such as ``effort: max`` or ``reviewer: oracle-pro``."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any

from ..errors import InvalidValue

DIRECTIVE_KEYS = ("effort", "reviewer", "human_checkpoint", "auto_write")
EFFORT_PRESETS = ("lite", "balanced", "max", "beast")
_ALIASES = {"human checkpoint": "human_checkpoint", "human-checkpoint": "human_checkpoint", "auto-write": "auto_write"}
_TRUE = ("true", "yes", "on", "1")
_FALSE = ("false", "no", "off", "0")
_ROUTE_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._\-]*$")
# a key, a colon, then a value that does not start like a URL path or a drive
_PAIR = re.compile(r"(?<![\w/])(?P<key>human[ _-]checkpoint|[A-Za-z][A-Za-z0-9_\-]*)\s*:\s*(?P<value>[^\s/][^\s]*)")


@dataclass(frozen=True)
class Directive:
    key: str
    value: Any


@dataclass
class DirectiveParse:
    directives: list[Directive] = field(default_factory=list)
    unknown: list[str] = field(default_factory=list)
    remainder: str = ""

    def as_dict(self) -> dict[str, Any]:
        return {d.key: d.value for d in self.directives}


def _bool(key: str, raw: str) -> bool:
    low = raw.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise InvalidValue(f"{key}: expected true or false, got {raw!r}")


def validate_directive(key: str, raw: str) -> Directive:
    key = _ALIASES.get(key.lower(), key.lower())
    if key not in DIRECTIVE_KEYS:
        raise InvalidValue(f"unknown directive {key!r}")
    if key == "effort":
        value = raw.lower()
        if value not in EFFORT_PRESETS:
            raise InvalidValue(f"effort {raw!r} is not one of {', '.join(EFFORT_PRESETS)}")
        return Directive(key, value)
    if key == "reviewer":
        if not _ROUTE_RE.match(raw):
            raise InvalidValue(f"reviewer {raw!r} is not a route name")
        return Directive(key, raw)
    return Directive(key, _bool(key, raw))


def extract_directives(text: str) -> DirectiveParse:
    """Pull recognised directives out of ``text``; unknown keys are reported and left in place."""
    out = DirectiveParse()
    kept: list[str] = []
    pos = 0
    for m in _PAIR.finditer(text):
        key = _ALIASES.get(m.group("key").lower(), m.group("key").lower())
        if key not in DIRECTIVE_KEYS:
            out.unknown.append(m.group("key"))
            continue
        value = m.group("value").rstrip(".,;")
        out.directives.append(validate_directive(key, value))
        kept.append(text[pos:m.start()])
        pos = m.end()
    kept.append(text[pos:])
    out.remainder = " ".join("".join(kept).split())
    return out


def parse_directives(text: str) -> list[Directive]:
    return extract_directives(text).directives
