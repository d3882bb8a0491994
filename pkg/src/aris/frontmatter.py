"""Restricted YAML frontmatter: scalars and flat lists of scalars only.

A document is::

    ---
    key: value
    list:
      - a
      - b
    ---
    <body, kept byte-for-byte>

Nested mappings (and lists of lists/mappings) are rejected so every consumer
sees the same flat shape regardless of which YAML features an author reached for.
"""

from __future__ import annotations

import datetime as _dt
from typing import Any

import yaml

from .errors import MalformedFrontmatter, MissingFrontmatter

FENCE = "---"

Scalar = str | int | float | bool | None


def _is_fence(line: str) -> bool:
    return line.rstrip("\r\n").rstrip() == FENCE


def split(text: str) -> tuple[str, str]:
    """Return ``(frontmatter_block, body)``.

    The body is everything after the closing fence line, untouched.
    """
    if text.startswith("\ufeff"):
        text = text[1:]
    lines = text.splitlines(keepends=True)
    if not lines or not _is_fence(lines[0]):
        raise MissingFrontmatter("document does not open with a '---' fence")
    for idx in range(1, len(lines)):
        if _is_fence(lines[idx]):
            return "".join(lines[1:idx]), "".join(lines[idx + 1 :])
    raise MalformedFrontmatter("frontmatter fence is never closed")


def _normalize_scalar(value: Any, key: str) -> Scalar:
    if isinstance(value, (_dt.date, _dt.datetime)):
        return value.isoformat()
    if value is None or isinstance(value, (str, bool, int, float)):
        return value
    raise MalformedFrontmatter(f"key {key!r}: unsupported value type {type(value).__name__}")


def parse_block(block: str) -> dict[str, Scalar | list[Scalar]]:
    try:
        data = yaml.safe_load(block) if block.strip() else {}
    except yaml.YAMLError as exc:
        raise MalformedFrontmatter(f"unparseable frontmatter: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise MalformedFrontmatter("frontmatter must be a key-value block")
    out: dict[str, Scalar | list[Scalar]] = {}
    for key, value in data.items():
        if not isinstance(key, str):
            raise MalformedFrontmatter(f"non-string key {key!r}")
        if isinstance(value, dict):
            raise MalformedFrontmatter(f"key {key!r}: nested mappings are not allowed")
        if isinstance(value, list):
            items = []
            for item in value:
                if isinstance(item, (dict, list)):
                    raise MalformedFrontmatter(f"key {key!r}: lists must be flat")
                items.append(_normalize_scalar(item, key))
            out[key] = items
        else:
            out[key] = _normalize_scalar(value, key)
    return out


def parse(text: str) -> tuple[dict[str, Scalar | list[Scalar]], str]:
    """Parse a fenced document into ``(metadata, body)``."""
    block, body = split(text)
    return parse_block(block), body


def dump_block(meta: dict[str, Any]) -> str:
    for key, value in meta.items():
        if isinstance(value, dict):
            raise MalformedFrontmatter(f"key {key!r}: nested mappings are not allowed")
    if not meta:
        return ""
    text = yaml.safe_dump(meta, sort_keys=False, allow_unicode=True, default_flow_style=False, width=1_000_000)
    # PyYAML writes some line-break characters (U+0085) raw and reads them back
    # as spaces; escaped output is exact, so use it when the readable form is lossy
    if yaml.safe_load(text) != meta:
        text = yaml.safe_dump(meta, sort_keys=False, allow_unicode=False, default_flow_style=False, width=1_000_000)
    return text


def dump(meta: dict[str, Any], body: str) -> str:
    return f"{FENCE}\n{dump_block(meta)}{FENCE}\n{body}"
