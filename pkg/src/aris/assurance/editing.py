"""Five fixed editing passes over a manuscript draft.

Passes 1-3 are rewrites delegated to a model; pass 4 (terminology) and pass 5
(numbers) are deterministic checks that flag problems without editing.
"""

from __future__ import annotations

import difflib
import re
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import yaml

from .._assets import asset_text
from ..bridges import BridgeHub
from .common import ask_fresh, fenced_blocks, prompt
from .numbers import classify_mention, extract_numbers, load_raw_values

PASSES = (
    (1, "clutter_removal", "editing-clutter.md"),
    (2, "active_voice", "editing-active-voice.md"),
    (3, "sentence_structure", "editing-sentence-structure.md"),
    (4, "terminology_consistency", None),
    (5, "numerical_consistency", None),
)

_SECTION = re.compile(r"^(?:\\section\*?\{(?P<tex>[^}]*)\}|(?P<hashes>#{1,2})\s+(?P<md>.+))\s*$", re.M)


@dataclass
class PassResult:
    number: int
    name: str
    changes: int = 0
    checks: int = 0
    flags: list[str] = field(default_factory=list)
    note: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "pass": self.number,
            "name": self.name,
            "changes": self.changes,
            "checks": self.checks,
            "flags": list(self.flags),
            "note": self.note,
        }


@dataclass
class EditingPassReport:
    passes: list[PassResult]

    def to_json(self) -> list[dict[str, Any]]:
        return [p.to_dict() for p in self.passes]

    def render_markdown(self) -> str:
        lines = ["# Editing report", "", "| pass | name | changes | checks | flags |", "|---|---|---|---|---|"]
        for p in self.passes:
            lines.append(f"| {p.number} | {p.name} | {p.changes} | {p.checks} | {len(p.flags)} |")
        for p in self.passes:
            if p.flags or p.note:
                lines += ["", f"## Pass {p.number}: {p.name}", ""]
                if p.note:
                    lines.append(p.note)
                lines += [f"- {flag}" for flag in p.flags]
        lines.append("")
        return "\n".join(lines)


def changed_lines(before: str, after: str) -> int:
    """Lines touched by the edit: the larger side of each non-equal diff block."""
    a, b = before.splitlines(), after.splitlines()
    total = 0
    for tag, i1, i2, j1, j2 in difflib.SequenceMatcher(None, a, b, autojunk=False).get_opcodes():
        if tag != "equal":
            total += max(i2 - i1, j2 - j1)
    return total


def load_terminology(path: str | None = None) -> dict[str, list[str]]:
    if path is None:
        text = asset_text("terminology.yaml")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    data = yaml.safe_load(text) or {}
    return {str(k): [str(t) for t in v] for k, v in (data.get("groups") or {}).items()}


def methods_span(text: str) -> tuple[int, int] | None:
    """Character span of the first section whose title mentions methods."""
    heads = list(_SECTION.finditer(text))
    for i, m in enumerate(heads):
        title = m.group("tex") if m.group("tex") is not None else m.group("md")
        if re.search(r"method", title, re.I):
            end = heads[i + 1].start() if i + 1 < len(heads) else len(text)
            return m.end(), end
    return None


def _term_re(term: str) -> re.Pattern:
    return re.compile(rf"(?<![\w-]){re.escape(term)}(?![\w-])", re.I)


def _occurrences(text: str, terms: Sequence[str]) -> list[tuple[int, str]]:
    """Non-overlapping term hits; longer terms win where they overlap shorter ones."""
    hits: list[tuple[int, int, str]] = []
    for term in sorted(terms, key=len, reverse=True):
        for m in _term_re(term).finditer(text):
            if any(s < m.end() and m.start() < e for s, e, _ in hits):
                continue
            hits.append((m.start(), m.end(), term))
    return sorted((s, t) for s, _, t in hits)


def terminology_flags(text: str, groups: Mapping[str, Sequence[str]]) -> list[str]:
    span = methods_span(text)
    flags = []
    for concept, terms in groups.items():
        hits = _occurrences(text, terms)
        if not hits:
            continue
        in_methods = [h for h in hits if span and span[0] <= h[0] < span[1]]
        established_at, established = (in_methods or hits)[0]
        for pos, term in hits:
            if pos > established_at and term.lower() != established.lower():
                line = text.count("\n", 0, pos) + 1
                flags.append(f"line {line}: '{term}' used where '{established}' was established ({concept})")
    return flags


def numeric_flags(text: str, raw_files: Mapping[str, str] | None) -> tuple[int, list[str]]:
    if not raw_files:
        return 0, []
    raw = load_raw_values(raw_files)
    keys = sorted({c for k in raw for c in k.split(".") if c and not c.isdigit()})
    checks, flags = 0, []
    for mention in extract_numbers(text, keys):
        status, match, value = classify_mention(mention, raw)
        if match is None:
            continue
        checks += 1
        if status == "number_mismatch":
            flags.append(f"{mention.text} disagrees with {match.key} = {value}")
    return checks, flags


def run_editing_passes(
    draft: str,
    hub: BridgeHub | None = None,
    editor: str | None = None,
    terminology: Mapping[str, Sequence[str]] | None = None,
    raw_files: Mapping[str, str] | None = None,
    run_id: str | None = None,
) -> tuple[str, EditingPassReport]:
    if not draft.strip():
        raise ValueError("the draft is empty")
    groups = load_terminology() if terminology is None else terminology
    text = draft
    results = []
    for number, name, template in PASSES:
        result = PassResult(number, name)
        if template is not None:
            if hub is None or editor is None:
                result.note = "skipped: no editor bridge configured"
            else:
                reply = ask_fresh(hub, editor, prompt(template), f"Draft:\n\n{text}", run_id)
                blocks = fenced_blocks(reply, "draft")
                if blocks:
                    revised = blocks[-1]
                    if text.endswith("\n") and not revised.endswith("\n"):
                        revised += "\n"
                    result.changes = changed_lines(text, revised)
                    text = revised
                else:
                    result.note = "editor reply had no draft block; text kept"
        elif number == 4:
            result.flags = terminology_flags(text, groups)
            result.checks = sum(len(_occurrences(text, t)) for t in groups.values())
        else:
            result.checks, result.flags = numeric_flags(text, raw_files)
        results.append(result)
    return text, EditingPassReport(results)
