"""Citation audit along three independent axes: existence, metadata, context."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

from ..bridges import BridgeHub
from ..errors import UnparseableFindings
from .common import ask_fresh, md_cell, parse_block, prompt

AXES = ("existence", "metadata", "context")
RECOMMENDATIONS = ("KEEP", "FIX", "REPLACE", "REMOVE")

_CITE = re.compile(r"\\cite[a-zA-Z]*\*?(?:\[[^\]]*\]){0,2}\{([^}]*)\}")
Lookup = Callable[[str, Mapping[str, str]], "str | None"]


def recommend(existence: str, metadata: str, context: str, replaceable: bool = False) -> str:
    if existence == "fail":
        return "REPLACE" if replaceable else "REMOVE"
    if metadata == "fail" or context == "fail":
        return "FIX"
    return "KEEP"


def _read_braced(text: str, i: int, open_ch: str, close_ch: str) -> tuple[str, int]:
    depth, start = 0, i
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            i += 2
            continue
        if ch == open_ch:
            depth += 1
        elif ch == close_ch:
            depth -= 1
            if depth == 0:
                return text[start + 1 : i], i + 1
        i += 1
    raise ValueError("unbalanced braces in bibliography")


def parse_bibtex(text: str) -> dict[str, dict[str, str]]:
    """Minimal BibTeX reader: ``@type{key, field = {..} | ".." | bare, ...}``."""
    entries: dict[str, dict[str, str]] = {}
    for m in re.finditer(r"@(\w+)\s*\{", text):
        kind = m.group(1).lower()
        if kind in ("comment", "preamble", "string"):
            continue
        body, _ = _read_braced(text, m.end() - 1, "{", "}")
        key, _, rest = body.partition(",")
        fields: dict[str, str] = {"ENTRYTYPE": kind}
        i = 0
        while i < len(rest):
            fm = re.compile(r"\s*(\w[\w-]*)\s*=\s*").match(rest, i)
            if not fm:
                i += 1
                continue
            name, i = fm.group(1).lower(), fm.end()
            if i < len(rest) and rest[i] == "{":
                value, i = _read_braced(rest, i, "{", "}")
            elif i < len(rest) and rest[i] == '"':
                end = rest.index('"', i + 1)
                value, i = rest[i + 1 : end], end + 1
            else:
                vm = re.compile(r"[^,]*").match(rest, i)
                value, i = vm.group(0).strip(), vm.end()
            fields[name] = re.sub(r"\s+", " ", value).strip()
        entries[key.strip()] = fields
    return entries


def cite_contexts(tex: str) -> dict[str, list[str]]:
    """Citing sentence(s) per key, in order of first citation."""
    out: dict[str, list[str]] = {}
    for m in _CITE.finditer(tex):
        start = max(tex.rfind(". ", 0, m.start()) + 2, tex.rfind("\n\n", 0, m.start()) + 2, 0)
        end_dot = tex.find(". ", m.end())
        end = len(tex) if end_dot < 0 else end_dot + 1
        sentence = re.sub(r"\s+", " ", tex[start:end]).strip()
        for key in m.group(1).split(","):
            key = key.strip()
            if key:
                out.setdefault(key, []).append(sentence)
    return out


@dataclass(frozen=True)
class CitationCandidate:
    cite_key: str
    metadata: Mapping[str, str]
    contexts: tuple[str, ...] = ()


def candidates_from_sources(bibtex: str, tex: str) -> list[CitationCandidate]:
    bib = parse_bibtex(bibtex)
    return [CitationCandidate(k, bib.get(k, {}), tuple(ctx)) for k, ctx in cite_contexts(tex).items()]


@dataclass(frozen=True)
class CitationEntry:
    cite_key: str
    existence: str
    metadata: str
    context: str
    recommendation: str
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        for axis in (self.existence, self.metadata, self.context):
            if axis not in ("pass", "fail"):
                raise ValueError(f"axis verdict must be pass or fail, got {axis!r}")
        if self.recommendation not in RECOMMENDATIONS:
            raise ValueError(f"unknown recommendation {self.recommendation!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "cite_key": self.cite_key,
            "existence": self.existence,
            "metadata": self.metadata,
            "context": self.context,
            "recommendation": self.recommendation,
            "notes": list(self.notes),
        }


def offline_lookup(cite_key: str, metadata: Mapping[str, str]) -> str | None:
    """Stand-in for a bibliographic search tool; there is no lookup offline."""
    return None


def _axis_prompt(axis: str, cand: CitationCandidate, lookup_result: str | None) -> str:
    meta = "\n".join(f"  {k}: {v}" for k, v in sorted(cand.metadata.items()))
    lines = [f"Axis: {axis}", f"Key: {cand.cite_key}", "Entry:", meta or "  (no bibliography entry)"]
    if axis == "context":
        lines.append("Citing sentences:")
        lines += [f"- {c}" for c in cand.contexts]
    lines.append("Lookup: " + (lookup_result if lookup_result else "no lookup available"))
    return "\n".join(lines)


def audit_citations(
    entries: Sequence[CitationCandidate],
    hub: BridgeHub,
    reviewer: str,
    lookup: Lookup = offline_lookup,
    run_id: str | None = None,
) -> list[CitationEntry]:
    """One fresh reviewer call per (entry, axis). Recommendations are advisory."""
    out = []
    system = prompt("citation-axis.md")
    for cand in entries:
        if not cand.metadata:
            out.append(CitationEntry(cand.cite_key, "fail", "fail", "fail", "REMOVE", ("key is cited but not in the bibliography",)))
            continue
        found = lookup(cand.cite_key, cand.metadata)
        verdicts: dict[str, str] = {}
        notes: list[str] = []
        replaceable = False
        for axis in AXES:
            reply = ask_fresh(hub, reviewer, system, _axis_prompt(axis, cand, found), run_id)
            data = parse_block(reply, "citation")
            if not isinstance(data, dict):
                raise UnparseableFindings("citation block must be a mapping")
            verdict = str(data.get("verdict", "")).strip().lower()
            if verdict not in ("pass", "fail"):
                raise UnparseableFindings(f"{cand.cite_key}/{axis}: verdict {verdict!r}")
            verdicts[axis] = verdict
            if axis == "existence":
                replaceable = bool(data.get("replaceable", False))
            note = str(data.get("note", "")).strip()
            if note:
                notes.append(f"{axis}: {note}")
        rec = recommend(verdicts["existence"], verdicts["metadata"], verdicts["context"], replaceable)
        out.append(CitationEntry(cand.cite_key, verdicts["existence"], verdicts["metadata"], verdicts["context"], rec, tuple(notes)))
    return out


def render_citation_audit(entries: Sequence[CitationEntry]) -> str:
    lines = [
        "# Citation audit",
        "",
        "Recommendations need human approval before they are applied.",
        "",
        "| key | existence | metadata | context | recommendation | notes |",
        "|---|---|---|---|---|---|",
    ]
    for e in entries:
        lines.append(
            f"| {e.cite_key} | {e.existence} | {e.metadata} | {e.context} | {e.recommendation} | {md_cell('; '.join(e.notes))} |"
        )
    lines.append("")
    return "\n".join(lines)
