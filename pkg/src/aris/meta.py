"""Usage event log, pattern analysis, and reviewer-gated patch proposals.

Proposals are stored as diffs and reach disk only through :func:`accept_proposal`,
which the human triggers explicitly.
"""

from __future__ import annotations

import difflib
import json
import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path
from typing import Any, Iterable, Mapping

from . import frontmatter
from .bridges import BridgeHub, Message
from .errors import InvalidProposalState, IoFailure, NotFound, PatchApplyError, StaleTarget
from .review import parse_review_reply
from .store import Project, append_line, atomic_write, digest, read_jsonl, utcnow

logger = logging.getLogger(__name__)

SURFACE_THRESHOLD = 7.0
PROPOSAL_STATES = ("proposed", "surfaced", "accepted", "rejected")


@dataclass(frozen=True)
class Event:
    timestamp: str
    tool: str
    success: bool = True
    overrides: Mapping[str, Any] = field(default_factory=dict)
    run_id: str = ""
    skill: str | None = None
    kind: str = "tool_call"  # tool_call | review_score | approval | override
    score: float | None = None
    detail: str = ""

    def to_json(self) -> dict[str, Any]:
        data = {
            "ts": self.timestamp,
            "kind": self.kind,
            "tool": self.tool,
            "success": self.success,
            "overrides": dict(self.overrides),
            "run_id": self.run_id,
            "skill": self.skill,
        }
        if self.score is not None:
            data["score"] = self.score
        if self.detail:
            data["detail"] = self.detail
        return data

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "Event":
        return cls(
            str(data["ts"]),
            str(data.get("tool", "")),
            bool(data.get("success", True)),
            dict(data.get("overrides") or {}),
            str(data.get("run_id", "")),
            data.get("skill"),
            str(data.get("kind", "tool_call")),
            data.get("score"),
            str(data.get("detail", "")),
        )


def events_path(project: Project) -> Path:
    return project.meta_dir / "events.jsonl"


def _last_timestamp(path: Path) -> str | None:
    if not path.exists():
        return None
    with open(path, "rb") as fh:
        fh.seek(0, 2)
        size = fh.tell()
        fh.seek(max(0, size - 8192))
        tail = fh.read().decode("utf-8", errors="replace")
    for line in reversed(tail.splitlines()):
        try:
            return str(json.loads(line)["ts"])
        except (ValueError, KeyError, TypeError):
            continue
    return None


def log_event(project: Project, event: Event) -> Event:
    """Append one event; timestamps are clamped so the file stays non-decreasing."""
    path = events_path(project)
    last = _last_timestamp(path)
    if last is not None and event.timestamp < last:
        event = replace(event, timestamp=last)
    try:
        append_line(path, json.dumps(event.to_json(), sort_keys=True, ensure_ascii=False))
    except OSError as exc:
        raise IoFailure(f"could not append to {path}: {exc}") from exc
    return event


def record(project: Project, tool: str, **kwargs: Any) -> Event:
    return log_event(project, Event(utcnow(), tool, **kwargs))


def read_events(project_or_path: Project | Path) -> tuple[list[Event], list[str]]:
    path = events_path(project_or_path) if isinstance(project_or_path, Project) else Path(project_or_path)
    records, warnings = read_jsonl(path)
    events = []
    for obj in records:
        try:
            events.append(Event.from_json(obj))
        except (KeyError, TypeError, ValueError) as exc:
            warnings.append(f"skipped malformed event: {exc}")
    return events, warnings


# -- analysis --------------------------------------------------------------


@dataclass(frozen=True)
class AnalysisConfig:
    failure_rate: float = 0.3
    min_calls: int = 5
    plateau_window: int = 3
    plateau_epsilon: float = 0.2


@dataclass
class MetaFindings:
    override_hotspots: list[tuple[str, int]] = field(default_factory=list)
    failing_tools: list[tuple[str, int, int]] = field(default_factory=list)  # tool, failures, calls
    score_plateaus: list[tuple[str, list[float]]] = field(default_factory=list)

    def is_empty(self) -> bool:
        return not (self.override_hotspots or self.failing_tools or self.score_plateaus)

    def to_json(self) -> dict[str, Any]:
        return {
            "override_hotspots": [list(x) for x in self.override_hotspots],
            "failing_tools": [list(x) for x in self.failing_tools],
            "score_plateaus": [[r, s] for r, s in self.score_plateaus],
        }


def analyze(events: Iterable[Event], config: AnalysisConfig | None = None) -> MetaFindings:
    config = config or AnalysisConfig()
    ordered = sorted(events, key=lambda e: e.timestamp)
    overrides: Counter[str] = Counter()
    calls: Counter[str] = Counter()
    failures: Counter[str] = Counter()
    scores: dict[str, list[float]] = defaultdict(list)
    for e in ordered:
        for param in e.overrides:
            overrides[param] += 1
        if e.kind == "tool_call":
            calls[e.tool] += 1
            if not e.success:
                failures[e.tool] += 1
        if e.kind == "review_score" and e.score is not None:
            scores[e.run_id].append(float(e.score))
    hotspots = sorted(overrides.items(), key=lambda kv: (-kv[1], kv[0]))
    failing = sorted(
        (
            (tool, failures[tool], n)
            for tool, n in calls.items()
            if n >= config.min_calls and Decimal(failures[tool]) / n > Decimal(str(config.failure_rate))
        ),
        key=lambda t: (-Decimal(t[1]) / t[2], t[0]),
    )
    k, eps = config.plateau_window, Decimal(str(config.plateau_epsilon))
    plateaus = []
    for run_id in sorted(scores):
        window = scores[run_id][-k:]
        if len(window) == k:
            dec = [Decimal(str(s)) for s in window]
            if max(dec) - min(dec) < eps:
                plateaus.append((run_id, window))
    return MetaFindings(hotspots, failing, plateaus)


# -- proposals -------------------------------------------------------------


@dataclass(frozen=True)
class PatchProposal:
    proposal_id: str
    target: str  # project-relative path
    rationale: str
    diff: str
    base_hash: str
    reviewer_score: float | None = None
    state: str = "proposed"

    def __post_init__(self):
        if self.state not in PROPOSAL_STATES:
            raise ValueError(f"unknown proposal state {self.state!r}")
        if self.state == "surfaced" and (self.reviewer_score is None or self.reviewer_score < SURFACE_THRESHOLD):
            raise ValueError("a surfaced proposal needs a reviewer score of at least 7")


def proposals_dir(project: Project) -> Path:
    return project.meta_dir / "proposals"


def proposal_path(project: Project, proposal_id: str) -> Path:
    return proposals_dir(project) / f"{proposal_id}.md"


def make_unified_diff(old: str, new: str, path: str) -> str:
    """Unified diff that marks a missing final newline the way patch tools expect."""
    out = []
    for line in difflib.unified_diff(
        old.splitlines(keepends=True), new.splitlines(keepends=True), f"a/{path}", f"b/{path}"
    ):
        if line.endswith("\n"):
            out.append(line)
        else:
            out.append(line + "\n\\ No newline at end of file\n")
    return "".join(out)


_HUNK = re.compile(r"^@@ -(\d+)(?:,(\d+))? \+(\d+)(?:,(\d+))? @@")


def apply_unified_diff(original: str, diff: str) -> str:
    """Apply a single-file unified diff, checking every context and removed line."""
    src = original.splitlines(keepends=True)
    out: list[str] = []
    pos = 0
    lines = diff.splitlines(keepends=True)
    i = 0
    while i < len(lines) and not lines[i].startswith("@@"):
        i += 1
    if i == len(lines) and diff.strip():
        raise PatchApplyError("diff has no hunks")
    while i < len(lines):
        m = _HUNK.match(lines[i])
        if not m:
            raise PatchApplyError(f"expected a hunk header, got {lines[i]!r}")
        start = int(m.group(1))
        old_len = int(m.group(2)) if m.group(2) is not None else 1
        anchor = start - 1 if old_len > 0 else start
        if anchor < pos:
            raise PatchApplyError("hunks overlap or are out of order")
        out.extend(src[pos:anchor])
        pos = anchor
        i += 1
        old_seg: list[str] = []
        new_seg: list[str] = []
        last_tag = ""
        while i < len(lines) and not lines[i].startswith("@@"):
            line = lines[i]
            tag, body = line[:1], line[1:]
            if tag == "\\":
                # "\ No newline at end of file" applies to the line just before it
                if last_tag in (" ", "-"):
                    old_seg[-1] = old_seg[-1].rstrip("\n")
                if last_tag in (" ", "+"):
                    new_seg[-1] = new_seg[-1].rstrip("\n")
            elif tag in (" ", "-", "+"):
                if tag != "+":
                    old_seg.append(body)
                if tag != "-":
                    new_seg.append(body)
                last_tag = tag
            else:
                raise PatchApplyError(f"unexpected diff line {line!r}")
            i += 1
        if src[pos : pos + len(old_seg)] != old_seg:
            raise PatchApplyError(f"hunk at line {start} does not match the target")
        out.extend(new_seg)
        pos += len(old_seg)
    out.extend(src[pos:])
    return "".join(out)


def _proposal_id(target: str, diff: str) -> str:
    return "P-" + digest(f"{target}\0{diff}".encode())[:10]


def save_proposal(project: Project, proposal: PatchProposal) -> Path:
    meta = {
        "id": proposal.proposal_id,
        "target": proposal.target,
        "base_hash": proposal.base_hash,
        "state": proposal.state,
        "reviewer_score": proposal.reviewer_score,
    }
    body = f"## Rationale\n\n{proposal.rationale.strip()}\n\n## Diff\n\n```diff\n{proposal.diff}```\n"
    path = proposal_path(project, proposal.proposal_id)
    atomic_write(path, frontmatter.dump(meta, body).encode("utf-8"))
    return path


_DIFF_BLOCK = re.compile(r"```diff\n(.*)```\s*$", re.S)
_RATIONALE = re.compile(r"## Rationale\n\n(.*?)\n\n## Diff", re.S)


def load_proposal(project: Project, proposal_id: str) -> PatchProposal:
    path = proposal_path(project, proposal_id)
    if not path.exists():
        raise NotFound(f"no proposal {proposal_id}")
    meta, body = frontmatter.parse(path.read_text(encoding="utf-8"))
    diff = _DIFF_BLOCK.search(body)
    rationale = _RATIONALE.search(body)
    score = meta.get("reviewer_score")
    return PatchProposal(
        str(meta["id"]),
        str(meta["target"]),
        rationale.group(1) if rationale else "",
        diff.group(1) if diff else "",
        str(meta["base_hash"]),
        float(score) if score is not None else None,
        str(meta["state"]),
    )


def list_proposals(project: Project) -> list[PatchProposal]:
    return [load_proposal(project, p.stem) for p in sorted(proposals_dir(project).glob("*.md"))]


def propose_patch(project: Project, target: str | Path, new_content: str, rationale: str) -> PatchProposal:
    """Record a proposed edit to a harness file as a diff. Never touches the target."""
    rel = project.relpath(target)
    path = project.root / rel
    current = path.read_text(encoding="utf-8")
    diff = make_unified_diff(current, new_content, rel)
    if not diff:
        raise ValueError("the proposal does not change the target")
    proposal = PatchProposal(_proposal_id(rel, diff), rel, rationale, diff, digest(current.encode("utf-8")))
    save_proposal(project, proposal)
    return proposal


GATE_PROMPT = (
    "You review a proposed change to a research-harness skill file. Read the target file and the "
    "proposal file. Score the change from 0 to 10 for whether it should be offered to the user, "
    "and end with a fenced review block containing the score."
)


def gate_proposal(
    project: Project,
    proposal: PatchProposal,
    hub: BridgeHub,
    reviewer: str,
    run_id: str | None = None,
) -> PatchProposal:
    """Attach a reviewer score; surfaced at 7 or above, rejected below."""
    if proposal.state != "proposed":
        raise InvalidProposalState(f"{proposal.proposal_id} is {proposal.state}, not proposed")
    user = (
        "Objective: score this proposed skill change.\nArtifacts:\n"
        f"- {proposal.target}\n- {project.relpath(proposal_path(project, proposal.proposal_id))}"
    )
    exchange = hub.send(reviewer, [Message("system", GATE_PROMPT), Message("user", user)], run_id)
    score = parse_review_reply(exchange.reply).score
    state = "surfaced" if score >= SURFACE_THRESHOLD else "rejected"
    gated = replace(proposal, reviewer_score=score, state=state)
    save_proposal(project, gated)
    log_event(project, Event(utcnow(), "meta-gate", True, {}, run_id or "", None, "review_score", score, gated.proposal_id))
    return gated


def accept_proposal(project: Project, proposal_id: str) -> PatchProposal:
    """Apply a surfaced proposal after the human approves it.

    This is the only function that writes a proposal's target file.
    """
    proposal = load_proposal(project, proposal_id)
    if proposal.state != "surfaced":
        raise InvalidProposalState(f"{proposal_id} is {proposal.state}; only surfaced proposals can be accepted")
    path = project.root / proposal.target
    current = path.read_text(encoding="utf-8")
    if digest(current.encode("utf-8")) != proposal.base_hash:
        raise StaleTarget(f"{proposal.target} changed since {proposal_id} was proposed")
    patched = apply_unified_diff(current, proposal.diff)
    with project.lock:
        atomic_write(path, patched.encode("utf-8"))
    accepted = replace(proposal, state="accepted")
    save_proposal(project, accepted)
    log_event(project, Event(utcnow(), "meta-accept", True, {}, "", None, "approval", None, proposal_id))
    return accepted


def decline_proposal(project: Project, proposal_id: str) -> PatchProposal:
    proposal = load_proposal(project, proposal_id)
    if proposal.state not in ("proposed", "surfaced"):
        raise InvalidProposalState(f"{proposal_id} is already {proposal.state}")
    declined = replace(proposal, state="rejected")
    save_proposal(project, declined)
    log_event(project, Event(utcnow(), "meta-decline", True, {}, "", None, "approval", None, proposal_id))
    return declined


def summarize_findings(findings: MetaFindings) -> str:
    lines = ["Override hotspots:"]
    lines += [f"  {param}: {n}" for param, n in findings.override_hotspots] or ["  (none)"]
    lines.append("Failing tools:")
    lines += [f"  {tool}: {f}/{n} failed" for tool, f, n in findings.failing_tools] or ["  (none)"]
    lines.append("Score plateaus:")
    lines += [f"  {run}: {', '.join(f'{s:g}' for s in scores)}" for run, scores in findings.score_plateaus] or ["  (none)"]
    return "\n".join(lines)
