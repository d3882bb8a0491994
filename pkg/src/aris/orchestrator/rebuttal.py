"""Rebuttal phases and the three safety gates that guard them.

Gate placement: ``claims-check`` guards phase 5, ``tone-check`` phase 6 and
``evidence-check`` phase 7. The gate names and checks are house choices.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Any, Sequence

PHASES = (
    "parse_reviews",
    "classify_concerns",
    "plan_responses",
    "draft_rebuttal",
    "tone_polish",
    "assemble",
    "stress_test",
)
# gate name -> 1-based phase number it guards
GATE_POSITIONS = {"claims-check": 5, "tone-check": 6, "evidence-check": 7}
DEFAULT_BANNED_PHRASES = (
    "obviously",
    "clearly the reviewer",
    "the reviewer is wrong",
    "the reviewer failed",
    "misunderstood",
    "did not read",
    "trivially",
    "nonsense",
)
CONCERN_KEYWORDS = (
    ("experiments", ("experiment", "baseline", "ablation", "dataset", "benchmark", "seed", "result")),
    ("theory", ("proof", "theorem", "lemma", "bound", "assumption")),
    ("novelty", ("novel", "novelty", "incremental", "prior work", "contribution")),
    ("related_work", ("related work", "cite", "citation", "missing reference")),
    ("clarity", ("unclear", "clarity", "confusing", "typo", "notation", "writing")),
)

_REVIEWER_HEAD = re.compile(r"^\s*(?:#+\s*)?(?:reviewer|review)\s*#?\s*(\w+)\s*:?\s*$", re.I | re.M)
_BULLET = re.compile(r"^\s*(?:[-*•]|\d+[.)]|\(\w+\))\s+")
_POINT_REF = re.compile(r"\[(R\w+\.\d+)\]")
_NUMBER = re.compile(r"(?<![\w.])[-+]?\d+(?:\.\d+)?%?")


@dataclass(frozen=True)
class ReviewPoint:
    point_id: str
    reviewer: str
    text: str
    concern: str = "other"

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.point_id, "reviewer": self.reviewer, "text": self.text, "concern": self.concern}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ReviewPoint":
        return cls(str(data["id"]), str(data["reviewer"]), str(data["text"]), str(data.get("concern", "other")))


def _points_of(block: str) -> list[str]:
    points: list[str] = []
    current: list[str] = []
    for line in block.splitlines():
        if not line.strip():
            if current:
                points.append(" ".join(current))
                current = []
            continue
        if _BULLET.match(line):
            if current:
                points.append(" ".join(current))
            current = [_BULLET.sub("", line).strip()]
        else:
            current.append(line.strip())
    if current:
        points.append(" ".join(current))
    return [p for p in points if p]


def parse_reviews(text: str) -> list[ReviewPoint]:
    """Split reviews into points ``R<reviewer>.<n>``; reviewer headings are optional."""
    if not text.strip():
        raise ValueError("the review input is empty")
    heads = list(_REVIEWER_HEAD.finditer(text))
    blocks: list[tuple[str, str]] = []
    if not heads:
        blocks.append(("1", text))
    else:
        if text[: heads[0].start()].strip():
            blocks.append(("0", text[: heads[0].start()]))
        for i, m in enumerate(heads):
            end = heads[i + 1].start() if i + 1 < len(heads) else len(text)
            blocks.append((m.group(1), text[m.end():end]))
    out = []
    for reviewer, block in blocks:
        for n, point in enumerate(_points_of(block), start=1):
            out.append(ReviewPoint(f"R{reviewer}.{n}", reviewer, point))
    if not out:
        raise ValueError("no review points found")
    return out


def classify(point: ReviewPoint) -> ReviewPoint:
    low = point.text.lower()
    for concern, words in CONCERN_KEYWORDS:
        if any(w in low for w in words):
            return ReviewPoint(point.point_id, point.reviewer, point.text, concern)
    return ReviewPoint(point.point_id, point.reviewer, point.text, "other")


def numbers_in(text: str) -> set[str]:
    return {m.group(0).lstrip("+").rstrip("%") for m in _NUMBER.finditer(text)}


@dataclass
class RebuttalState:
    points: list[ReviewPoint] = field(default_factory=list)
    paper: str = ""
    evidence: str = ""
    reviews: str = ""
    draft: str = ""
    polished: str = ""
    rebuttal: str = ""
    banned_phrases: Sequence[str] = DEFAULT_BANNED_PHRASES


@dataclass(frozen=True)
class GateDecision:
    gate: str
    position: int
    status: str  # pass | fail | skipped
    reason: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def claims_check(state: RebuttalState) -> GateDecision:
    """Every number in the draft appears in the paper, the reviews or the supplied evidence."""
    known = numbers_in(state.paper) | numbers_in(state.evidence) | numbers_in(state.reviews)
    known |= {p.point_id.split(".")[-1] for p in state.points}
    text = _POINT_REF.sub("", state.draft)
    unsupported = sorted(numbers_in(text) - known)
    if unsupported:
        return GateDecision("claims-check", GATE_POSITIONS["claims-check"], "fail", "unsupported numbers: " + ", ".join(unsupported))
    return GateDecision("claims-check", GATE_POSITIONS["claims-check"], "pass")


def tone_check(state: RebuttalState) -> GateDecision:
    low = state.polished.lower()
    hits = [p for p in state.banned_phrases if p.lower() in low]
    if hits:
        return GateDecision("tone-check", GATE_POSITIONS["tone-check"], "fail", "banned phrases: " + ", ".join(hits))
    return GateDecision("tone-check", GATE_POSITIONS["tone-check"], "pass")


def evidence_check(state: RebuttalState) -> GateDecision:
    """Every review point is answered by its id."""
    answered = set(_POINT_REF.findall(state.rebuttal))
    missing = [p.point_id for p in state.points if p.point_id not in answered]
    if missing:
        return GateDecision("evidence-check", GATE_POSITIONS["evidence-check"], "fail", "unanswered points: " + ", ".join(missing))
    return GateDecision("evidence-check", GATE_POSITIONS["evidence-check"], "pass")


GATE_CHECKS = {"claims-check": claims_check, "tone-check": tone_check, "evidence-check": evidence_check}


def evaluate_gate(name: str, state: RebuttalState) -> GateDecision:
    return GATE_CHECKS[name](state)


def rebuttal_gates(state: RebuttalState) -> list[GateDecision]:
    """All three gates in phase order; after the first failure the rest are skipped."""
    out: list[GateDecision] = []
    failed = False
    for name in sorted(GATE_POSITIONS, key=GATE_POSITIONS.get):
        if failed:
            out.append(GateDecision(name, GATE_POSITIONS[name], "skipped", "an earlier gate failed"))
            continue
        decision = evaluate_gate(name, state)
        out.append(decision)
        failed = not decision.passed
    return out


def phases_completed(decisions: Sequence[GateDecision]) -> int:
    """How many of the seven phases run under these gate decisions."""
    for d in decisions:
        if not d.passed:
            return d.position - 1
    return len(PHASES)


def render_points(points: Sequence[ReviewPoint]) -> str:
    lines = ["# Review points", ""]
    for p in points:
        lines.append(f"- [{p.point_id}] ({p.concern}) {p.text}")
    lines.append("")
    return "\n".join(lines)


_LINE = re.compile(r"^- \[(R\w+\.\d+)\] \((\w+)\) (.*)$")


def read_points(text: str) -> list[ReviewPoint]:
    out = []
    for line in text.splitlines():
        m = _LINE.match(line)
        if m:
            pid = m.group(1)
            out.append(ReviewPoint(pid, pid[1:].split(".")[0], m.group(3), m.group(2)))
    return out
