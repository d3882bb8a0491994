"""Independent review rounds, convergence, access scope, and auto-debug.

The reviewer only ever receives an objective line and artifact paths (plus,
for bridges without file access, the raw bytes of those files). Executor prose
never reaches the reviewer prompt.
"""

from __future__ import annotations

import fnmatch
import json
import logging
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import yaml

from ._assets import asset_text
from .bridges import BridgeHub, Message
from .errors import (
    ArtifactPathMissing,
    PolicyUnsatisfiable,
    ScopeViolation,
    UnknownErrorClass,
    UnparseableReview,
)
from .skills import load_shared_reference
from .store import Project, append_line

logger = logging.getLogger(__name__)

ACCESS_SCOPES = ("document_only", "artifact_augmented", "repository_level")
CONTEXT_POLICIES = ("fresh", "cross_round")
SEVERITIES = ("critical", "major", "minor")
DECISIONS = ("accept", "continue", "stop_max_rounds")

_DOCUMENT_PATTERNS = (
    "*.tex",
    "*.bib",
    "*.pdf",
    "paper/*",
    ".aris/artifacts/PAPER_DRAFT/*",
    ".aris/artifacts/PAPER_PLAN/*",
    ".aris/artifacts/NARRATIVE_REPORT/*",
    ".aris/artifacts/COMPILED_PAPER/*",
)

DEFAULT_SCOPE_PATTERNS: dict[str, tuple[str, ...]] = {
    "document_only": _DOCUMENT_PATTERNS,
    "artifact_augmented": _DOCUMENT_PATTERNS
    + (".aris/artifacts/*", "results/*", "*.csv", "*.json", "*.jsonl", "*.md", "*.txt", "*.log", "*.svg"),
    "repository_level": ("*",),
}

DEFAULT_ERROR_CLASSES: dict[str, tuple[str, ...]] = {
    "dependency_missing": ("install_dependency", "pin_version", "vendor_fallback"),
    "oom": ("reduce_batch_size", "enable_gradient_checkpointing", "use_mixed_precision"),
    "timeout": ("extend_time_limit", "reduce_workload", "checkpoint_and_resume"),
    "assertion_failure": ("patch_code", "add_diagnostics"),
    "other": ("retry_verbatim", "executor_patch"),
}


def _prompt(name: str) -> str:
    return asset_text("prompts", name)


def default_rubric() -> str:
    return _prompt("review-rubric.md")


# -- types -----------------------------------------------------------------


@dataclass(frozen=True)
class RouteDirective:
    reviewer: str = "codex"
    executor_family: str = ""
    reviewer_family: str = ""


@dataclass(frozen=True)
class ReviewRequest:
    objective: str
    artifact_paths: tuple[str, ...]
    access_scope: str = "artifact_augmented"
    context_policy: str = "fresh"
    route: RouteDirective = field(default_factory=RouteDirective)

    def __post_init__(self):
        object.__setattr__(self, "artifact_paths", tuple(str(p) for p in self.artifact_paths))
        if not self.artifact_paths:
            raise ValueError("a review request needs at least one artifact path")
        if self.access_scope not in ACCESS_SCOPES:
            raise ValueError(f"unknown access scope {self.access_scope!r}")
        if self.context_policy not in CONTEXT_POLICIES:
            raise ValueError(f"unknown context policy {self.context_policy!r}")
        if "\n" in self.objective.strip():
            raise ValueError("the objective must be a single line")


@dataclass(frozen=True)
class ActionItem:
    id: str
    severity: str
    description: str
    affected_artifact: str = ""
    resolved: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "severity": self.severity,
            "description": self.description,
            "affected_artifact": self.affected_artifact,
            "resolved": self.resolved,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ActionItem":
        return cls(
            str(data["id"]),
            str(data["severity"]),
            str(data.get("description", "")),
            str(data.get("affected_artifact", "")),
            bool(data.get("resolved", False)),
        )


@dataclass(frozen=True)
class ReviewResult:
    score: float
    action_items: tuple[ActionItem, ...]
    rubric_notes: str = ""
    round: int = 1
    thread_id: str = ""
    # ids the reviewer reports as fixed (only honoured under cross_round)
    confirmed_resolved: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0 <= self.score <= 10:
            raise ValueError(f"score {self.score} outside [0, 10]")
        if self.round < 1:
            raise ValueError("round must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "score": self.score,
            "action_items": [i.to_dict() for i in self.action_items],
            "rubric_notes": self.rubric_notes,
            "round": self.round,
            "thread_id": self.thread_id,
            "confirmed_resolved": list(self.confirmed_resolved),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ReviewResult":
        return cls(
            float(data["score"]),
            tuple(ActionItem.from_dict(i) for i in data.get("action_items", [])),
            str(data.get("rubric_notes", "")),
            int(data.get("round", 1)),
            str(data.get("thread_id", "")),
            tuple(data.get("confirmed_resolved", [])),
        )


@dataclass(frozen=True)
class ConvergencePolicy:
    score_threshold: float = 6.0
    max_rounds: int = 4

    def __post_init__(self):
        if not 0 < self.score_threshold <= 10:
            raise ValueError("score_threshold must be in (0, 10]")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")


@dataclass(frozen=True)
class RemediationPolicy:
    retry_limit: int = 3
    min_distinct_strategies: int = 2
    rescue_route: str | None = None

    def __post_init__(self):
        if self.retry_limit < 1 or self.min_distinct_strategies < 1:
            raise ValueError("retry_limit and min_distinct_strategies must be >= 1")


# -- convergence -----------------------------------------------------------


def latest_item_states(history: Sequence[ReviewResult]) -> dict[str, ActionItem]:
    """Latest known state of every action item raised so far."""
    state: dict[str, ActionItem] = {}
    for result in history:
        for item in result.action_items:
            state[item.id] = item
    return state


def check_convergence(history: Sequence[ReviewResult], policy: ConvergencePolicy) -> str:
    if not history:
        raise ValueError("history must not be empty")
    latest = history[-1]
    criticals_open = any(
        item.severity == "critical" and not item.resolved for item in latest_item_states(history).values()
    )
    if latest.score > policy.score_threshold and not criticals_open:
        return "accept"
    if latest.round >= policy.max_rounds:
        return "stop_max_rounds"
    return "continue"


def check_family_separation(route: RouteDirective) -> str:
    if route.executor_family.strip().lower() == route.reviewer_family.strip().lower():
        return "warn_same_family"
    return "ok"


# -- threads ---------------------------------------------------------------


class ThreadRegistry:
    """Reviewer conversations. Ids come from a counter so replays are stable."""

    def __init__(self, counter: int = 0):
        self.counter = counter
        self.threads: dict[str, list[Message]] = {}

    def open(self, context_policy: str, prior_thread: str | None = None) -> str:
        if context_policy not in CONTEXT_POLICIES:
            raise ValueError(f"unknown context policy {context_policy!r}")
        if context_policy == "cross_round" and prior_thread:
            self.threads.setdefault(prior_thread, [])
            return prior_thread
        self.counter += 1
        thread_id = f"thread-{self.counter:04d}"
        self.threads[thread_id] = []
        return thread_id

    def history(self, thread_id: str) -> list[Message]:
        return self.threads.setdefault(thread_id, [])


def open_reviewer_thread(context_policy: str, prior_thread: str | None = None, registry: ThreadRegistry | None = None) -> str:
    return (registry or ThreadRegistry()).open(context_policy, prior_thread)


# -- scope -----------------------------------------------------------------


def check_scope(
    paths: Iterable[str],
    scope: str,
    project: Project,
    patterns: Mapping[str, Sequence[str]] = DEFAULT_SCOPE_PATTERNS,
) -> list[str]:
    """Project-relative posix paths, or ScopeViolation / ArtifactPathMissing."""
    allowed = patterns[scope]
    out = []
    for raw in paths:
        p = Path(raw)
        if not p.is_absolute():
            p = project.root / p
        resolved = p.resolve()
        try:
            rel = resolved.relative_to(project.root).as_posix()
        except ValueError:
            raise ScopeViolation(f"{raw} lies outside the project") from None
        if not resolved.is_file():
            raise ArtifactPathMissing(f"{rel} does not exist")
        if not any(fnmatch.fnmatchcase(rel, pat) for pat in allowed):
            raise ScopeViolation(f"{rel} is not readable under scope {scope}")
        out.append(rel)
    return out


# -- reply parsing ---------------------------------------------------------

_REVIEW_BLOCK = re.compile(r"```review[ \t]*\n(.*?)```", re.S)
_SCORE_FALLBACK = re.compile(r"score\s*[:=]?\s*(\d+(?:\.\d+)?)\s*/\s*10", re.I)


@dataclass(frozen=True)
class ParsedReview:
    score: float
    items: tuple[ActionItem, ...]
    resolved: tuple[str, ...]
    notes: str


def parse_review_reply(text: str, round_no: int = 1) -> ParsedReview:
    blocks = _REVIEW_BLOCK.findall(text)
    notes = _REVIEW_BLOCK.sub("", text).strip()
    if not blocks:
        m = _SCORE_FALLBACK.search(text)
        if not m:
            raise UnparseableReview("reply has neither a review block nor a score")
        return ParsedReview(_check_score(m.group(1)), (), (), notes)
    try:
        data = yaml.safe_load(blocks[-1]) or {}
    except yaml.YAMLError as exc:
        raise UnparseableReview(f"review block is not valid YAML: {exc}") from exc
    if not isinstance(data, dict) or "score" not in data:
        raise UnparseableReview("review block has no score")
    score = _check_score(data["score"])
    items = []
    for n, raw in enumerate(data.get("items") or [], start=1):
        if not isinstance(raw, dict):
            raise UnparseableReview(f"item {n} is not a mapping")
        severity = str(raw.get("severity", "")).strip().lower()
        if severity not in SEVERITIES:
            raise UnparseableReview(f"item {n}: unknown severity {severity!r}")
        item_id = str(raw.get("id") or f"R{round_no}-{n}")
        items.append(
            ActionItem(
                item_id,
                severity,
                str(raw.get("description", "")).strip(),
                str(raw.get("artifact", raw.get("affected_artifact", "")) or ""),
            )
        )
    resolved = tuple(str(x) for x in (data.get("resolved") or []))
    return ParsedReview(score, tuple(items), resolved, notes)


def _check_score(value: Any) -> float:
    try:
        score = float(value)
    except (TypeError, ValueError):
        raise UnparseableReview(f"score {value!r} is not a number") from None
    if not 0 <= score <= 10:
        raise UnparseableReview(f"score {score} outside [0, 10]")
    return score


# -- engine ----------------------------------------------------------------


def build_user_prompt(objective: str, rel_paths: Sequence[str]) -> str:
    lines = [f"Objective: {objective.strip()}", "Artifacts:"]
    lines += [f"- {p}" for p in rel_paths]
    lines.append("Read the files yourself and end your reply with a fenced review block.")
    return "\n".join(lines)


@dataclass
class LoopState:
    """Everything needed to continue a review loop after an interruption."""

    round: int = 0
    history: list[ReviewResult] = field(default_factory=list)
    decisions: list[str] = field(default_factory=list)
    claimed: list[str] = field(default_factory=list)
    resolved: list[str] = field(default_factory=list)
    thread_id: str | None = None
    thread_counter: int = 0
    artifact_paths: list[str] = field(default_factory=list)

    @property
    def outcome(self) -> str | None:
        if self.decisions and self.decisions[-1] != "continue":
            return self.decisions[-1]
        return None

    @property
    def scores(self) -> list[float]:
        return [r.score for r in self.history]

    def to_dict(self) -> dict[str, Any]:
        return {
            "round": self.round,
            "history": [r.to_dict() for r in self.history],
            "decisions": list(self.decisions),
            "claimed": list(self.claimed),
            "resolved": list(self.resolved),
            "thread_id": self.thread_id,
            "thread_counter": self.thread_counter,
            "artifact_paths": list(self.artifact_paths),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LoopState":
        return cls(
            round=int(data.get("round", 0)),
            history=[ReviewResult.from_dict(r) for r in data.get("history", [])],
            decisions=list(data.get("decisions", [])),
            claimed=list(data.get("claimed", [])),
            resolved=list(data.get("resolved", [])),
            thread_id=data.get("thread_id"),
            thread_counter=int(data.get("thread_counter", 0)),
            artifact_paths=list(data.get("artifact_paths", [])),
        )


@dataclass(frozen=True)
class Revision:
    """What the executor did between rounds."""

    resolved_ids: tuple[str, ...] = ()
    artifact_paths: tuple[str, ...] | None = None


class ReviewEngine:
    def __init__(
        self,
        hub: BridgeHub,
        project: Project,
        convergence: ConvergencePolicy | None = None,
        scope_patterns: Mapping[str, Sequence[str]] | None = None,
        rubric: str | None = None,
        threads: ThreadRegistry | None = None,
        run_id: str | None = None,
    ):
        self.hub = hub
        self.project = project
        self.convergence = convergence or ConvergencePolicy()
        self.scope_patterns = dict(scope_patterns or DEFAULT_SCOPE_PATTERNS)
        self.rubric = rubric if rubric is not None else default_rubric()
        self.threads = threads or ThreadRegistry()
        self.run_id = run_id

    def system_prompt(self) -> str:
        return self.rubric.rstrip() + "\n\n" + load_shared_reference("reviewer-independence").content

    def build_messages(self, request: ReviewRequest, rel_paths: Sequence[str], thread_id: str) -> list[Message]:
        prior = list(self.threads.history(thread_id))
        user = build_user_prompt(request.objective, rel_paths)
        config = self.hub.configs.get(request.route.reviewer)
        if config is not None and config.inline_artifacts:
            for rel in rel_paths:
                data = (self.project.root / rel).read_bytes().decode("utf-8", errors="replace")
                user += f"\n\n=== {rel} ===\n{data}"
        if not prior:
            prior = [Message("system", self.system_prompt())]
        return prior + [Message("user", user)]

    def run_round(
        self,
        request: ReviewRequest,
        round_no: int = 1,
        prior_thread: str | None = None,
        seen_ids: Iterable[str] = (),
    ) -> ReviewResult:
        rel_paths = check_scope(request.artifact_paths, request.access_scope, self.project, self.scope_patterns)
        thread_id = self.threads.open(request.context_policy, prior_thread)
        messages = self.build_messages(request, rel_paths, thread_id)
        exchange = self.hub.send(request.route.reviewer, messages, self.run_id)
        parsed = parse_review_reply(exchange.reply, round_no)
        history = self.threads.history(thread_id)
        if request.context_policy == "cross_round":
            history[:] = messages + [Message("assistant", exchange.reply)]
        items = _dedupe_ids(parsed.items, set(seen_ids), round_no, request.context_policy)
        return ReviewResult(parsed.score, items, parsed.notes, round_no, thread_id, parsed.resolved)

    def run_loop(
        self,
        request: ReviewRequest,
        revise: Callable[[LoopState, ReviewResult], Revision],
        state: LoopState | None = None,
        on_round: Callable[[LoopState], None] | None = None,
    ) -> LoopState:
        """Review, decide, revise; repeat until accept or the round cap."""
        state = state or LoopState(artifact_paths=list(request.artifact_paths))
        self.threads.counter = max(self.threads.counter, state.thread_counter)
        warn = check_family_separation(request.route)
        if warn != "ok":
            logger.warning("executor and reviewer share a model family (%s)", request.route.reviewer_family)
        while state.outcome is None:
            round_no = state.round + 1
            req = replace(request, artifact_paths=tuple(state.artifact_paths or request.artifact_paths))
            seen = {i.id for r in state.history for i in r.action_items}
            prior = state.thread_id if request.context_policy == "cross_round" else None
            result = self.run_round(req, round_no, prior, seen)
            if request.context_policy == "cross_round":
                for item_id in result.confirmed_resolved:
                    if item_id in seen and item_id not in state.resolved:
                        state.resolved.append(item_id)
                state.claimed = [c for c in state.claimed if c not in state.resolved]
            state.round = round_no
            state.thread_id = result.thread_id
            state.thread_counter = self.threads.counter
            state.history.append(result)
            decision = check_convergence(self.resolved_view(state), self.convergence)
            state.decisions.append(decision)
            self._log_round(result, decision, request.context_policy)
            if decision == "continue":
                revision = revise(state, result)
                open_ids = {i for i in latest_item_states(state.history)}
                for item_id in revision.resolved_ids:
                    if item_id not in open_ids:
                        continue
                    if request.context_policy == "fresh":
                        if item_id not in state.resolved:
                            state.resolved.append(item_id)
                    elif item_id not in state.claimed:
                        state.claimed.append(item_id)
                if revision.artifact_paths is not None:
                    state.artifact_paths = list(revision.artifact_paths)
            if on_round is not None:
                on_round(state)
        return state

    @staticmethod
    def resolved_view(state: LoopState) -> list[ReviewResult]:
        """History with resolution flags taken from the engine ledger."""
        done = set(state.resolved)
        out = []
        for result in state.history:
            items = tuple(replace(i, resolved=i.id in done) for i in result.action_items)
            out.append(replace(result, action_items=items))
        return out

    def _log_round(self, result: ReviewResult, decision: str, policy: str) -> None:
        if not self.run_id:
            return
        line = {
            "round": result.round,
            "score": result.score,
            "items": [i.id for i in result.action_items],
            "critical": [i.id for i in result.action_items if i.severity == "critical"],
            "decision": decision,
            "thread_id": result.thread_id,
            "context_policy": policy,
        }
        append_line(self.project.run_dir(self.run_id) / "review_log.jsonl", json.dumps(line, sort_keys=True))


def _dedupe_ids(items: Sequence[ActionItem], seen: set[str], round_no: int, policy: str) -> tuple[ActionItem, ...]:
    """Keep ids unique within a run.

    A fresh reviewer cannot know earlier ids, so a clash is a new item and gets
    a round-qualified id. Under cross_round a repeated id means the reviewer is
    re-raising that item.
    """
    out = []
    used: set[str] = set()
    for item in items:
        item_id = item.id
        if item_id in used or (policy == "fresh" and item_id in seen):
            base = f"R{round_no}-{item.id}"
            item_id, n = base, 1
            while item_id in used or item_id in seen:
                n += 1
                item_id = f"{base}.{n}"
        used.add(item_id)
        out.append(replace(item, id=item_id))
    return tuple(out)


def run_review_round(request: ReviewRequest, bridge: BridgeHub, project: Project, **kwargs) -> ReviewResult:
    return ReviewEngine(bridge, project, **kwargs).run_round(request)


# -- auto-debug ------------------------------------------------------------


@dataclass(frozen=True)
class Failure:
    error_class: str
    message: str
    context: str = ""


@dataclass(frozen=True)
class Attempt:
    number: int
    strategy: str
    succeeded: bool
    detail: str = ""


@dataclass(frozen=True)
class DebugOutcome:
    kind: str  # remediated | unresolved | rescued
    attempts: tuple[Attempt, ...]
    diagnosis: str = ""


def auto_debug(
    failure: Failure,
    policy: RemediationPolicy,
    bridges: BridgeHub | None,
    apply_strategy: Callable[[str, int], tuple[bool, str] | bool],
    error_classes: Mapping[str, Sequence[str]] = DEFAULT_ERROR_CLASSES,
    run_id: str | None = None,
) -> DebugOutcome:
    """Try class-specific strategies, then (optionally) ask a rescue model.

    ``apply_strategy(strategy_id, attempt_number)`` performs one remediation
    and reports whether the failing step now passes.
    """
    strategies = error_classes.get(failure.error_class)
    if not strategies:
        raise UnknownErrorClass(f"{failure.error_class!r} is not a configured error class")
    attempts: list[Attempt] = []
    for n in range(1, policy.retry_limit + 1):
        strategy = strategies[(n - 1) % len(strategies)]
        outcome = apply_strategy(strategy, n)
        ok, detail = outcome if isinstance(outcome, tuple) else (bool(outcome), "")
        attempts.append(Attempt(n, strategy, ok, detail))
        if ok:
            return DebugOutcome("remediated", tuple(attempts))
    distinct = len({a.strategy for a in attempts})
    if distinct < policy.min_distinct_strategies:
        raise PolicyUnsatisfiable(
            f"only {distinct} distinct strategy tried for {failure.error_class!r}; "
            f"at least {policy.min_distinct_strategies} are required before giving up",
            list(attempts),
        )
    if policy.rescue_route and bridges is not None:
        log = "\n".join(f"{a.number}. {a.strategy}: {'ok' if a.succeeded else 'failed'} {a.detail}".rstrip() for a in attempts)
        prompt = f"Error class: {failure.error_class}\nError: {failure.message}\n"
        if failure.context:
            prompt += f"Context:\n{failure.context}\n"
        prompt += f"Attempts:\n{log}"
        exchange = bridges.send(
            policy.rescue_route,
            [Message("system", _prompt("rescue.md")), Message("user", prompt)],
            run_id,
        )
        return DebugOutcome("rescued", tuple(attempts), exchange.reply.strip())
    return DebugOutcome("unresolved", tuple(attempts))
