"""Stage 3: check the manuscript's numbers against raw result files."""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import Decimal
from pathlib import Path
from typing import Any, Mapping, Sequence

from ..bridges import BridgeHub
from ..errors import UnparseableFindings
from .claims import ClaimLedger
from .common import ask_fresh, md_cell, parse_block, path_list, prompt, write_pair
from .numbers import classify_mention, extract_numbers, load_raw_values, match_keys, numeric_compare

AUDIT_STATUSES = ("exact_match", "rounding_ok", "number_mismatch", "config_mismatch", "missing_evidence")
REPORT_NAME = "PAPER_CLAIM_AUDIT.md"
REPORT_JSON = "paper_claim_audit.json"


@dataclass(frozen=True)
class ClaimAuditEntry:
    claim_ref: str
    manuscript_value: str
    precision: int
    evidence_value: str | None
    status: str
    note: str = ""
    evidence_key: str | None = None
    sentence: str = ""
    ledger_claim: str | None = None

    def __post_init__(self):
        if self.status not in AUDIT_STATUSES:
            raise ValueError(f"unknown audit status {self.status!r}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "claim_ref": self.claim_ref,
            "manuscript_value": self.manuscript_value,
            "precision": self.precision,
            "evidence_value": self.evidence_value,
            "evidence_key": self.evidence_key,
            "status": self.status,
            "note": self.note,
            "sentence": self.sentence,
            "ledger_claim": self.ledger_claim,
        }


def _plain(value: Decimal) -> str:
    text = format(value, "f")
    return text.rstrip("0").rstrip(".") if "." in text else text


def is_seed_file(name: str) -> bool:
    """Per-seed results live under a ``seeds/`` directory, one file per seed."""
    return "seeds" in Path(name).parts[:-1]


def seed_values(raw_files: Mapping[str, str]) -> dict[str, list[Decimal]]:
    out: dict[str, list[Decimal]] = {}
    for name in sorted(raw_files):
        if is_seed_file(name):
            for key, value in load_raw_values({name: raw_files[name]}).items():
                out.setdefault(key, []).append(value)
    return out


def _matches(display: str, precision: int, value: Decimal) -> bool:
    return numeric_compare(display, precision, value) != "number_mismatch"


def seed_pick_note(display: str, precision: int, seeds: Sequence[Decimal]) -> str | None:
    """A note when the number is one extreme seed while the seed mean says otherwise."""
    if len(seeds) < 2:
        return None
    mean = sum(seeds) / len(seeds)
    if _matches(display, precision, mean):
        return None
    for label, value in (("best", max(seeds)), ("worst", min(seeds))):
        if _matches(display, precision, value):
            shown = _plain(mean.quantize(Decimal(1).scaleb(-(precision + 2))))
            return f"matches the {label} of {len(seeds)} seeds ({_plain(value)}); the seed mean is {shown}"
    return None


def local_audit(manuscript: str, raw_files: Mapping[str, str], ledger: ClaimLedger | None = None) -> list[ClaimAuditEntry]:
    """Deterministic numeric statuses; no model involved.

    Files under ``seeds/`` are kept apart from the aggregate results: their
    mean stands in when no aggregate value names a quantity, and a number that
    equals one extreme seed but not the mean is reported as a config mismatch.
    """
    raw = load_raw_values({k: v for k, v in raw_files.items() if not is_seed_file(k)})
    seeds = seed_values(raw_files)
    means = {k: sum(v) / len(v) for k, v in seeds.items()}
    keys = sorted({c for k in list(raw) + list(seeds) for c in k.split(".") if c and not c.isdigit()})
    entries = []
    for mention in extract_numbers(manuscript, keys):
        status, match, value = classify_mention(mention, raw)
        if match is None and means:
            status, match, value = classify_mention(mention, means)
        seed_key = match_keys(mention.sentence, mention.position, means)
        pick = seed_pick_note(mention.text, mention.precision, seeds[seed_key[0].key]) if seed_key else None
        if pick and status in ("exact_match", "rounding_ok", "number_mismatch"):
            status = "config_mismatch"
        shown = ("-" if mention.text.startswith("-") else "") + mention.text.lstrip("+-")
        ledger_claim = None
        if ledger is not None:
            for record in ledger.records:
                if mention.text in record.statement:
                    ledger_claim = record.claim_id
                    break
        entries.append(
            ClaimAuditEntry(
                claim_ref=f"N{mention.index + 1:03d}",
                manuscript_value=shown + ("%" if mention.percent else ""),
                precision=mention.precision,
                evidence_value=_plain(value) if value is not None else None,
                status=status,
                evidence_key=match.key if match else None,
                sentence=mention.sentence,
                ledger_claim=ledger_claim,
                note=pick or ("" if match else "no raw value names this quantity"),
            )
        )
    return entries


def merge_reviewer_flags(entries: Sequence[ClaimAuditEntry], flags: Mapping[str, str]) -> list[ClaimAuditEntry]:
    """Reviewer config mismatches override numeric agreement, never a numeric failure."""
    out = []
    for entry in entries:
        note = flags.get(entry.claim_ref)
        if note is None:
            out.append(entry)
        elif entry.status in ("exact_match", "rounding_ok"):
            out.append(replace(entry, status="config_mismatch", note=note))
        else:
            out.append(replace(entry, note=f"{entry.note}; reviewer: {note}".lstrip("; ")))
    return out


def parse_audit_flags(reply: str) -> dict[str, str]:
    data = parse_block(reply, "audit")
    if data is None:
        return {}
    if not isinstance(data, list):
        raise UnparseableFindings("audit block must be a list")
    flags = {}
    for raw in data:
        if not isinstance(raw, dict) or "claim" not in raw:
            raise UnparseableFindings("each audit entry needs a claim ref")
        if str(raw.get("status", "config_mismatch")) != "config_mismatch":
            continue
        flags[str(raw["claim"])] = str(raw.get("note", "configuration differs")).strip()
    return flags


def audit_paper_claims(
    manuscript: str,
    ledger: ClaimLedger | None,
    raw_files: Mapping[str, str],
    hub: BridgeHub | None = None,
    reviewer: str | None = None,
    paths: Sequence[str] = (),
    run_id: str | None = None,
) -> list[ClaimAuditEntry]:
    """Local numeric audit, plus config checks from a zero-context reviewer when one is given."""
    entries = local_audit(manuscript, raw_files, ledger)
    if hub is None or reviewer is None or not entries:
        return entries
    lines = ["Objective: flag quantitative claims whose configuration differs from the evidence.", "Files:"]
    lines.append(path_list(list(paths) or sorted(raw_files)))
    lines.append("Claims:")
    lines += [f"- {e.claim_ref}: {e.manuscript_value} ({e.sentence})" for e in entries]
    reply = ask_fresh(hub, reviewer, prompt("paper-claim-audit.md"), "\n".join(lines), run_id)
    return merge_reviewer_flags(entries, parse_audit_flags(reply))


def render_audit(entries: Sequence[ClaimAuditEntry]) -> str:
    counts = {s: 0 for s in AUDIT_STATUSES}
    for e in entries:
        counts[e.status] += 1
    lines = ["# Paper claim audit", "", "| status | count |", "|---|---|"]
    lines += [f"| {s} | {n} |" for s, n in counts.items()]
    lines += ["", "| ref | manuscript | evidence | key | status | note |", "|---|---|---|---|---|---|"]
    for e in entries:
        lines.append(
            f"| {e.claim_ref} | {e.manuscript_value} | {e.evidence_value or '-'} | {e.evidence_key or '-'} | "
            f"{e.status} | {md_cell(e.note)} |"
        )
    lines.append("")
    return "\n".join(lines)


def write_audit(entries: Sequence[ClaimAuditEntry], out_dir: Path) -> tuple[Path, Path]:
    return write_pair(out_dir, REPORT_NAME, render_audit(entries), REPORT_JSON, [e.to_dict() for e in entries])
