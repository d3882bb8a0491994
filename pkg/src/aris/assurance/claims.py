"""Stage 2: map results to claim verdicts and propagate integrity status."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from ..bridges import BridgeHub
from ..errors import MissingEvidenceRef, UnparseableFindings
from ..wiki import CLAIM_VERDICTS, ResearchWiki, WikiNode
from .common import ask_fresh, md_cell, parse_block, prompt, write_pair
from .integrity import IntegrityReport

LEDGER_NAME = "CLAIM_LEDGER.md"
LEDGER_JSON = "claim_ledger.json"


@dataclass(frozen=True)
class ClaimCandidate:
    claim_id: str
    statement: str
    evidence_refs: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ClaimRecord:
    claim_id: str
    statement: str
    evidence_refs: tuple[tuple[str, str], ...]
    verdict: str
    integrity_status: str | None = None
    wiki_node: str | None = None
    requires_integrity_fix: bool = False
    rationale: str = ""

    def __post_init__(self):
        if self.verdict not in CLAIM_VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.verdict == "supported" and self.integrity_status == "fail":
            raise ValueError(f"claim {self.claim_id} cannot be supported while integrity fails")

    def to_dict(self) -> dict[str, Any]:
        return {
            "claim_id": self.claim_id,
            "statement": self.statement,
            "evidence_refs": [list(r) for r in self.evidence_refs],
            "verdict": self.verdict,
            "integrity_status": self.integrity_status,
            "wiki_node": self.wiki_node,
            "requires_integrity_fix": self.requires_integrity_fix,
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ClaimRecord":
        return cls(
            data["claim_id"],
            data["statement"],
            tuple(tuple(r) for r in data.get("evidence_refs", [])),
            data["verdict"],
            data.get("integrity_status"),
            data.get("wiki_node"),
            bool(data.get("requires_integrity_fix", False)),
            data.get("rationale", ""),
        )


@dataclass
class ClaimLedger:
    records: list[ClaimRecord] = field(default_factory=list)

    def get(self, claim_id: str) -> ClaimRecord:
        for r in self.records:
            if r.claim_id == claim_id:
                return r
        raise KeyError(claim_id)

    def to_json(self) -> list[dict[str, Any]]:
        return [r.to_dict() for r in self.records]

    @classmethod
    def from_json(cls, data: Sequence[Mapping[str, Any]]) -> "ClaimLedger":
        return cls([ClaimRecord.from_dict(d) for d in data])

    def render_markdown(self) -> str:
        lines = [
            "# Claim ledger",
            "",
            "| claim | verdict | integrity | needs integrity fix | evidence | statement |",
            "|---|---|---|---|---|---|",
        ]
        for r in self.records:
            refs = "; ".join(f"{a}:{loc}" if loc else a for a, loc in r.evidence_refs) or "-"
            lines.append(
                f"| {r.claim_id} | {r.verdict} | {r.integrity_status or 'n/a'} | "
                f"{'yes' if r.requires_integrity_fix else 'no'} | {md_cell(refs)} | {md_cell(r.statement)} |"
            )
        notes = [r for r in self.records if r.rationale]
        if notes:
            lines += ["", "## Rationale", ""]
            lines += [f"- {r.claim_id}: {md_cell(r.rationale)}" for r in notes]
        lines.append("")
        return "\n".join(lines)

    def write(self, out_dir: Path) -> tuple[Path, Path]:
        return write_pair(out_dir, LEDGER_NAME, self.render_markdown(), LEDGER_JSON, self.to_json())


Judge = Callable[[Sequence[ClaimCandidate], Mapping[str, str]], Mapping[str, tuple[str, str]]]


def propagate_integrity(verdict: str, integrity_status: str | None) -> tuple[str, bool]:
    """Apply the hard rule: a failed integrity audit caps a claim below supported."""
    if integrity_status != "fail":
        return verdict, False
    if verdict == "supported":
        return "partially_supported", True
    return verdict, True


def reviewer_judge(hub: BridgeHub, reviewer: str, run_id: str | None = None) -> Judge:
    """A judge that asks a fresh reviewer for one verdict per claim."""

    def judge(claims: Sequence[ClaimCandidate], evidence: Mapping[str, str]) -> dict[str, tuple[str, str]]:
        files = sorted({a for c in claims for a, _ in c.evidence_refs})
        lines = ["Objective: decide a verdict for each claim from the evidence files.", "Claims:"]
        for c in claims:
            refs = ", ".join(f"{a}:{loc}" if loc else a for a, loc in c.evidence_refs)
            lines.append(f"- {c.claim_id}: {c.statement} [evidence: {refs}]")
        lines.append("Evidence files:")
        lines += [f"- {evidence[a]}" for a in files]
        reply = ask_fresh(hub, reviewer, prompt("result-to-claim.md"), "\n".join(lines), run_id)
        data = parse_block(reply, "verdicts")
        if not isinstance(data, list):
            raise UnparseableFindings("verdicts block must be a list")
        out: dict[str, tuple[str, str]] = {}
        for raw in data:
            if not isinstance(raw, dict) or "claim" not in raw:
                raise UnparseableFindings("each verdict needs a claim id")
            verdict = str(raw.get("verdict", "")).strip().lower()
            if verdict not in CLAIM_VERDICTS:
                raise UnparseableFindings(f"claim {raw['claim']}: unknown verdict {verdict!r}")
            out[str(raw["claim"])] = (verdict, str(raw.get("rationale", "")).strip())
        return out

    return judge


def map_result_to_claim(
    claims: Sequence[ClaimCandidate],
    evidence: Mapping[str, str],
    judge: Judge,
    integrity_report: IntegrityReport | None = None,
    wiki: ResearchWiki | None = None,
) -> ClaimLedger:
    """Verdict per claim, capped by the integrity report, mirrored into the wiki.

    ``evidence`` maps each artifact name a claim may cite to the path the
    judge should read.
    """
    if not claims:
        raise ValueError("at least one claim is required")
    for claim in claims:
        for artifact, _ in claim.evidence_refs:
            if artifact not in evidence:
                raise MissingEvidenceRef(f"claim {claim.claim_id} cites unknown artifact {artifact!r}")
    verdicts = judge(claims, evidence)
    status = integrity_report.integrity_status if integrity_report is not None else None
    records = []
    for claim in claims:
        if claim.claim_id not in verdicts:
            raise UnparseableFindings(f"no verdict returned for claim {claim.claim_id}")
        raw_verdict, rationale = verdicts[claim.claim_id]
        verdict, needs_fix = propagate_integrity(raw_verdict, status)
        records.append(
            ClaimRecord(claim.claim_id, claim.statement, claim.evidence_refs, verdict, status, None, needs_fix, rationale)
        )
    if wiki is not None:
        records = [replace(r, wiki_node=push_to_wiki(wiki, r)) for r in records]
    return ClaimLedger(records)


def push_to_wiki(wiki: ResearchWiki, record: ClaimRecord) -> str:
    node = wiki.find_by_title("claim", record.statement)
    node_id = node.node_id if node else wiki.add_node(WikiNode("claim", record.statement))
    if wiki.get(node_id).status != record.verdict:
        wiki.update_claim_status(node_id, record.verdict)
    return node_id


def load_claims(data: Iterable[Mapping[str, Any]]) -> list[ClaimCandidate]:
    """Claims from plain mappings: ``{id, statement, evidence: [artifact or artifact:locator]}``."""
    out = []
    for raw in data:
        refs = []
        for ref in raw.get("evidence", []) or []:
            artifact, _, locator = str(ref).partition(":")
            refs.append((artifact, locator))
        out.append(ClaimCandidate(str(raw["id"]), str(raw["statement"]), tuple(refs)))
    return out
