"""Stage 1: integrity audit of evaluation code and outputs. Advisory only."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from ..bridges import BridgeHub
from ..errors import ScopeViolation, UnparseableFindings
from ..review import DEFAULT_SCOPE_PATTERNS, check_scope
from ..skills import load_shared_reference
from ..store import Project
from .common import ask_fresh, md_cell, parse_block, path_list, prompt, write_pair

CATEGORIES = (
    "model_derived_reference_labels",
    "self_normalized_scores",
    "phantom_results",
    "dead_code_or_unused_metric_inflation",
    "scope_inflation",
)
SEVERITY_RANK = {"pass": 0, "warn": 1, "fail": 2}
REPORT_NAME = "EXPERIMENT_AUDIT.md"
SUMMARY_NAME = "experiment_audit.json"


@dataclass(frozen=True)
class IntegrityFinding:
    category: str
    severity: str
    evidence: str = ""
    files: tuple[str, ...] = ()

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown integrity category {self.category!r}")
        if self.severity not in SEVERITY_RANK:
            raise ValueError(f"unknown severity {self.severity!r}")

    def to_dict(self) -> dict[str, Any]:
        return {"category": self.category, "severity": self.severity, "evidence": self.evidence, "files": list(self.files)}


def status_of(findings: Iterable[IntegrityFinding]) -> str:
    worst = "pass"
    for finding in findings:
        if SEVERITY_RANK[finding.severity] > SEVERITY_RANK[worst]:
            worst = finding.severity
    return worst


@dataclass
class IntegrityReport:
    findings: list[IntegrityFinding] = field(default_factory=list)
    report_path: str = ""
    summary_path: str = ""

    @property
    def integrity_status(self) -> str:
        return status_of(self.findings)

    def by_category(self) -> dict[str, str]:
        out = {c: "pass" for c in CATEGORIES}
        for f in self.findings:
            if SEVERITY_RANK[f.severity] > SEVERITY_RANK[out[f.category]]:
                out[f.category] = f.severity
        return out

    def to_json(self) -> dict[str, Any]:
        return {
            "integrity_status": self.integrity_status,
            "categories": self.by_category(),
            "findings": [f.to_dict() for f in self.findings],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "IntegrityReport":
        findings = [
            IntegrityFinding(f["category"], f["severity"], f.get("evidence", ""), tuple(f.get("files", [])))
            for f in data.get("findings", [])
        ]
        report = cls(findings)
        stated = data.get("integrity_status")
        if stated is not None and stated != report.integrity_status:
            raise ValueError(f"summary says {stated!r} but findings give {report.integrity_status!r}")
        return report

    def render_markdown(self) -> str:
        lines = [
            "# Experiment audit",
            "",
            f"Integrity status: **{self.integrity_status}**",
            "",
            "This audit is advisory. It does not stop the pipeline.",
            "",
            "| category | status |",
            "|---|---|",
        ]
        for category, severity in self.by_category().items():
            lines.append(f"| {category} | {severity} |")
        lines += ["", "## Findings", ""]
        if not self.findings:
            lines.append("No warn or fail findings.")
        for f in self.findings:
            files = ", ".join(f.files) or "-"
            lines.append(f"- **{f.severity}** `{f.category}`: {md_cell(f.evidence)} (files: {files})")
        lines += ["", "## Summary", "", "```json", json.dumps(self.to_json(), sort_keys=True), "```", ""]
        return "\n".join(lines)


_SUMMARY_RE = re.compile(r"```json\s*\n(.*?)```", re.S)


def parse_audit_markdown(text: str) -> IntegrityReport:
    """Recover the report from the summary block embedded in the markdown."""
    blocks = _SUMMARY_RE.findall(text)
    if not blocks:
        raise UnparseableFindings("audit report has no json summary block")
    return IntegrityReport.from_json(json.loads(blocks[-1]))


def parse_findings(reply: str) -> list[IntegrityFinding]:
    data = parse_block(reply, "findings")
    if data is None:
        return []
    if not isinstance(data, list):
        raise UnparseableFindings("findings block must be a list")
    findings = []
    for n, raw in enumerate(data, start=1):
        if not isinstance(raw, dict):
            raise UnparseableFindings(f"finding {n} is not a mapping")
        files = raw.get("files") or []
        if isinstance(files, str):
            files = [files]
        try:
            findings.append(
                IntegrityFinding(
                    str(raw.get("category", "")).strip(),
                    str(raw.get("severity", "")).strip().lower(),
                    str(raw.get("evidence", "")).strip(),
                    tuple(str(x) for x in files),
                )
            )
        except ValueError as exc:
            raise UnparseableFindings(f"finding {n}: {exc}") from exc
    return findings


def run_experiment_audit(
    eval_paths: Sequence[str],
    hub: BridgeHub,
    reviewer: str,
    project: Project,
    access_scope: str = "repository_level",
    out_dir: Path | None = None,
    run_id: str | None = None,
) -> IntegrityReport:
    """Ask a reviewer with repository-level access to audit the listed files."""
    if access_scope != "repository_level":
        raise ScopeViolation("the experiment audit needs repository_level access")
    rel = check_scope(eval_paths, access_scope, project, DEFAULT_SCOPE_PATTERNS)
    system = prompt("experiment-audit.md") + "\n\n" + load_shared_reference("experiment-integrity").content
    user = "Objective: audit these evaluation files for integrity problems.\nFiles:\n" + path_list(rel)
    reply = ask_fresh(hub, reviewer, system, user, run_id)
    report = IntegrityReport(parse_findings(reply))
    if out_dir is not None:
        md, js = write_pair(Path(out_dir), REPORT_NAME, report.render_markdown(), SUMMARY_NAME, report.to_json())
        report.report_path, report.summary_path = str(md), str(js)
    return report
