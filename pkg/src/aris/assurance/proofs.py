"""Proof-obligation ledger: one entry per theorem-like statement and per side condition."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Mapping

import yaml

from .._assets import asset_text
from ..bridges import BridgeHub
from ..errors import UnknownCategory, UnparseableFindings
from .common import ask_fresh, md_cell, parse_block, prompt

PROOF_STATUSES = ("valid", "invalid", "unjustified", "unclear")
IMPACTS = ("global", "local", "cosmetic")
TAXONOMY_SIZE = 20
FALLBACK_CATEGORY = 20

_ENV = re.compile(
    r"\\begin\{(?P<kind>theorem|lemma|proposition|corollary)\}(?:\[(?P<name>[^\]]*)\])?(?P<body>.*?)\\end\{(?P=kind)\}"
    r"(?:\s*\\begin\{proof\}(?P<proof>.*?)\\end\{proof\})?",
    re.S,
)
_LABEL = re.compile(r"\\label\{([^}]*)\}")
_MD = re.compile(r"^\s*(?:\*\*)?(?P<kind>Theorem|Lemma|Proposition|Corollary)\s+(?P<num>[\w.]+)", re.M)


def load_taxonomy(path: str | None = None) -> dict[int, str]:
    if path is None:
        text = asset_text("proof-taxonomy.yaml")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    cats = {int(k): str(v) for k, v in (yaml.safe_load(text) or {}).get("categories", {}).items()}
    if sorted(cats) != list(range(1, TAXONOMY_SIZE + 1)):
        raise ValueError(f"the proof taxonomy must number categories 1..{TAXONOMY_SIZE}")
    return cats


@dataclass(frozen=True)
class TheoremBlock:
    target: str
    kind: str
    statement: str
    proof: str = ""


def extract_theorems(text: str) -> list[TheoremBlock]:
    """LaTeX theorem environments, or Markdown "Theorem N" paragraphs when there are none."""
    out = []
    counters: dict[str, int] = {}
    for m in _ENV.finditer(text):
        kind = m.group("kind")
        counters[kind] = counters.get(kind, 0) + 1
        label = _LABEL.search(m.group("body") or "")
        target = label.group(1) if label else f"{kind.capitalize()} {counters[kind]}"
        out.append(TheoremBlock(target, kind, (m.group("body") or "").strip(), (m.group("proof") or "").strip()))
    if out:
        return out
    heads = list(_MD.finditer(text))
    for i, m in enumerate(heads):
        end = heads[i + 1].start() if i + 1 < len(heads) else len(text)
        out.append(TheoremBlock(f"{m.group('kind')} {m.group('num')}", m.group("kind").lower(), text[m.start():end].strip()))
    return out


@dataclass(frozen=True)
class ProofObligation:
    obligation_id: str
    target: str
    category: int
    proof_status: str
    impact: str
    description: str = ""
    parent: str | None = None

    def __post_init__(self):
        if self.proof_status not in PROOF_STATUSES:
            raise ValueError(f"unknown proof status {self.proof_status!r}")
        if self.impact not in IMPACTS:
            raise ValueError(f"unknown impact {self.impact!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "obligation_id": self.obligation_id,
            "target": self.target,
            "category": self.category,
            "proof_status": self.proof_status,
            "impact": self.impact,
            "description": self.description,
            "parent": self.parent,
        }


@dataclass(frozen=True)
class RedTeamRecord:
    target: str
    counterexample_found: bool
    note: str

    def to_dict(self) -> dict[str, Any]:
        return {"target": self.target, "counterexample_found": self.counterexample_found, "note": self.note}


@dataclass
class ProofLedger:
    obligations: list[ProofObligation] = field(default_factory=list)
    red_team: list[RedTeamRecord] = field(default_factory=list)

    def to_json(self) -> dict[str, Any]:
        return {"obligations": [o.to_dict() for o in self.obligations], "red_team": [r.to_dict() for r in self.red_team]}

    def render_markdown(self, taxonomy: Mapping[int, str] | None = None) -> str:
        lines = ["# Proof obligations", ""]
        if not self.obligations:
            lines += ["No theorem-like statements found.", ""]
            return "\n".join(lines)
        lines += ["| id | target | status | impact | category | note |", "|---|---|---|---|---|---|"]
        for o in self.obligations:
            cat = f"{o.category} {taxonomy[o.category]}" if taxonomy else str(o.category)
            lines.append(f"| {o.obligation_id} | {md_cell(o.target)} | {o.proof_status} | {o.impact} | {md_cell(cat)} | {md_cell(o.description)} |")
        lines += ["", "## Counterexample search", ""]
        for r in self.red_team:
            found = "counterexample found" if r.counterexample_found else "none found"
            lines.append(f"- {r.target}: {found}. {md_cell(r.note)}".rstrip())
        lines.append("")
        return "\n".join(lines)


def _axis(raw: Mapping[str, Any], key: str, allowed: tuple[str, ...], default: str) -> str:
    value = str(raw.get(key, default)).strip().lower()
    if value not in allowed:
        raise UnparseableFindings(f"{key} {value!r} is not one of {allowed}")
    return value


def _category(raw: Mapping[str, Any]) -> int:
    try:
        cat = int(raw.get("category", FALLBACK_CATEGORY))
    except (TypeError, ValueError):
        raise UnknownCategory(f"category {raw.get('category')!r} is not a number") from None
    if not 1 <= cat <= TAXONOMY_SIZE:
        raise UnknownCategory(f"category {cat} is outside 1..{TAXONOMY_SIZE}")
    return cat


_NO_COUNTEREXAMPLE = re.compile(r"^\s*(none|no counterexample|not found|n/?a)\b", re.I)


def build_proof_ledger(
    manuscript_theory: str,
    hub: BridgeHub | None,
    reviewer: str | None,
    taxonomy: Mapping[int, str] | None = None,
    run_id: str | None = None,
) -> ProofLedger:
    taxonomy = taxonomy or load_taxonomy()
    ledger = ProofLedger()
    theorems = extract_theorems(manuscript_theory)
    if theorems and (hub is None or reviewer is None):
        raise ValueError("a reviewer bridge is needed to check proofs")
    system = prompt("proof-check.md") + "\nTaxonomy:\n" + "\n".join(f"{k}. {v}" for k, v in sorted(taxonomy.items()))
    for n, thm in enumerate(theorems, start=1):
        user = f"Target: {thm.target}\nStatement:\n{thm.statement}\n"
        if thm.proof:
            user += f"Proof:\n{thm.proof}\n"
        reply = ask_fresh(hub, reviewer, system, user, run_id)
        data = parse_block(reply, "proof", required=False)
        if data is None:
            ledger.obligations.append(
                ProofObligation(f"P{n}", thm.target, FALLBACK_CATEGORY, "unclear", "local", "reviewer gave no proof block")
            )
            ledger.red_team.append(RedTeamRecord(thm.target, False, "not attempted"))
            continue
        if not isinstance(data, dict):
            raise UnparseableFindings("proof block must be a mapping")
        ledger.obligations.append(
            ProofObligation(
                f"P{n}",
                thm.target,
                _category(data),
                _axis(data, "status", PROOF_STATUSES, "unclear"),
                _axis(data, "impact", IMPACTS, "local"),
                str(data.get("note", "")).strip(),
            )
        )
        for k, cond in enumerate(data.get("side_conditions") or [], start=1):
            if not isinstance(cond, dict):
                raise UnparseableFindings("side conditions must be mappings")
            ledger.obligations.append(
                ProofObligation(
                    f"P{n}.{k}",
                    f"{thm.target}: {cond.get('condition', '')}".strip(),
                    _category(cond),
                    _axis(cond, "status", PROOF_STATUSES, "unclear"),
                    _axis(cond, "impact", IMPACTS, "local"),
                    str(cond.get("note", "")).strip(),
                    parent=f"P{n}",
                )
            )
        note = str(data.get("red_team", "not attempted")).strip()
        found = not _NO_COUNTEREXAMPLE.match(note) and note != "not attempted"
        ledger.red_team.append(RedTeamRecord(thm.target, found, note))
    return ledger
