"""Sequential workflow execution over skills, bridges and the artifact store.

Every step ends with a checkpoint (artifact versions plus mock-bridge cursors
and the run summary so far), so a run killed at any step boundary resumes to
the same artifacts. Review loops also checkpoint after every round.
"""

from __future__ import annotations

import json
import logging
import re
import secrets
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .. import meta
from ..assurance.citations import audit_citations, candidates_from_sources, render_citation_audit
from ..assurance.claims import ClaimLedger, load_claims, map_result_to_claim, reviewer_judge
from ..assurance.editing import load_terminology, run_editing_passes
from ..assurance.integrity import parse_audit_markdown, run_experiment_audit
from ..assurance.paper_audit import audit_paper_claims, render_audit
from ..assurance.proofs import build_proof_ledger, load_taxonomy
from ..assurance.common import parse_block
from ..bridges import BridgeHub, Message, resolve_route
from ..config import ArisConfig, load_config
from ..errors import (
    ArisError,
    ContractViolation,
    GateDeclined,
    InvalidValue,
    PendingApproval,
    RunInterrupted,
    SafetyGateFailed,
    StepFailed,
    WorkflowError,
)
from ..figures import render, validate_spec
from ..review import (
    ConvergencePolicy,
    Failure,
    LoopState,
    ReviewEngine,
    ReviewRequest,
    ReviewResult,
    Revision,
    RouteDirective,
    ThreadRegistry,
    auto_debug,
    build_user_prompt,
    parse_review_reply,
)
from ..skills import SkillRegistry, load_shared_reference
from ..store import ArtifactStore, Checkpoint, ContractIssue, Project, atomic_write, utcnow
from ..wiki import ResearchWiki, WikiNode
from .effort import apply_effort, effort_preset
from .experiments import CommandRunner, FixtureRunner, SubprocessRunner
from .rebuttal import (
    DEFAULT_BANNED_PHRASES,
    RebuttalState,
    classify,
    evaluate_gate,
    parse_reviews,
    read_points,
    render_points,
)
from .workflows import (
    FLAG_DEFAULTS,
    HUMAN_GATE,
    SAFETY_GATES,
    StepDef,
    WorkflowDef,
    check_workflow,
    load_workflow,
    with_chain,
    workflow_from_dict,
    workflow_to_dict,
)

logger = logging.getLogger(__name__)

APPROVAL_KINDS = ("human_checkpoint", "patch_accept", "citation_decision")
STEP_STATUSES = ("done", "skipped_by_gate", "failed")
RUN_STATUSES = ("completed", "gate_declined", "gate_failed", "pending_approval", "step_failed")

# approver(kind, payload) -> "approved" | "declined" | None (no decision available)
Approver = Callable[[str, Mapping[str, Any]], "str | None"]

_ARTIFACT_BLOCK = re.compile(
    r"^(?P<fence>`{3,})artifact[ \t]+(?P<name>[A-Za-z0-9_.\-]+)[ \t]*\n(?P<body>.*?)^(?P=fence)[ \t]*$",
    re.S | re.M,
)
_JSON_BLOCK = re.compile(r"```json[ \t]*\n(.*?)```", re.S)
# failures that end one step rather than the whole process
_STEP_ERRORS = (ArisError, ValueError, KeyError, TypeError)


@dataclass
class RunOptions:
    effort: str | None = None
    reviewer: str | None = None
    human_checkpoint: bool | None = None
    auto_write: bool | None = None
    params: dict[str, Any] = field(default_factory=dict)
    run_id: str | None = None
    # the command line that started the run, kept verbatim in the summary
    command: str = ""

    @classmethod
    def from_directives(cls, directives: Mapping[str, Any], **kwargs: Any) -> "RunOptions":
        known = {k: directives[k] for k in ("effort", "reviewer", "human_checkpoint", "auto_write") if k in directives}
        return cls(**known, **kwargs)


@dataclass
class StepRecord:
    index: int
    step_id: str
    skill: str
    status: str
    reason: str = ""
    produced: dict[str, int] = field(default_factory=dict)
    detail: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in STEP_STATUSES:
            raise ValueError(f"unknown step status {self.status!r}")


@dataclass
class RunSummary:
    run_id: str
    workflow: str
    status: str = "running"
    effort: str = "balanced"
    reviewer: str = ""
    executor: str = ""
    params: dict[str, Any] = field(default_factory=dict)
    flags: dict[str, bool] = field(default_factory=dict)
    steps: list[StepRecord] = field(default_factory=list)
    approvals: list[dict[str, Any]] = field(default_factory=list)
    gates: list[dict[str, Any]] = field(default_factory=list)
    review: dict[str, Any] | None = None
    error: str = ""
    command: str = ""
    started: str = ""
    finished: str = ""
    resumes: int = 0

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunSummary":
        data = dict(data)
        data["steps"] = [StepRecord(**s) for s in data.get("steps", [])]
        return cls(**data)

    def step_status(self, step_id: str) -> str | None:
        for s in self.steps:
            if s.step_id == step_id:
                return s.status
        return None


def summary_path(project: Project, run_id: str) -> Path:
    return project.run_dir(run_id) / "summary.json"


def load_summary(project: Project, run_id: str) -> RunSummary:
    return RunSummary.from_dict(json.loads(summary_path(project, run_id).read_text(encoding="utf-8")))


def new_run_id(workflow: str) -> str:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    slug = re.sub(r"[^A-Za-z0-9_.\-]+", "-", workflow)
    return f"{slug}-{stamp}-{secrets.token_hex(3)}"


def embed_json(markdown: str, data: Any) -> str:
    return markdown.rstrip() + "\n\n## Data\n\n```json\n" + json.dumps(data, indent=2, sort_keys=True) + "\n```\n"


def extract_json(text: str) -> Any:
    blocks = _JSON_BLOCK.findall(text)
    if not blocks:
        raise ValueError("no json data block")
    return json.loads(blocks[-1])


def parse_artifacts(reply: str) -> dict[str, str]:
    """``artifact NAME`` fenced blocks; use a longer fence when the body has its own fences."""
    out = {}
    for m in _ARTIFACT_BLOCK.finditer(reply):
        out[m.group("name")] = m.group("body")
    return out


def compile_stub(draft: str) -> str:
    return "% compiled stub: no LaTeX engine was run\n" + draft


@dataclass
class _Run:
    wf: WorkflowDef
    summary: RunSummary
    versions: dict[str, int]
    loop: dict[str, Any] | None = None

    @property
    def run_id(self) -> str:
        return self.summary.run_id

    @property
    def params(self) -> dict[str, Any]:
        return self.summary.params


class WorkflowRunner:
    def __init__(
        self,
        project: Project | str | Path,
        config: ArisConfig | None = None,
        hub: BridgeHub | None = None,
        registry: SkillRegistry | None = None,
        approver: Approver | None = None,
        command_runner: CommandRunner | None = None,
        halt_after_step: Callable[[int], bool] | None = None,
        log_events: bool = True,
    ):
        self.project = project if isinstance(project, Project) else Project(project)
        self.config = config or load_config(self.project)
        self.hub = hub or self.config.hub(self.project)
        if self.hub.project is None:
            self.hub.project = self.project
        if registry is None:
            user_root = Path(self.config.user_skills).expanduser() if self.config.user_skills else None
            registry = SkillRegistry.discover(user_root=user_root, project_root=self.project.skills_dir)
        self.registry = registry
        self.store = ArtifactStore(self.project)
        self.approver = approver
        self.command_runner = command_runner or self._default_command_runner()
        self.halt_after_step = halt_after_step
        self.log_events = log_events
        self._wiki: ResearchWiki | None = None

    def _default_command_runner(self) -> CommandRunner:
        exp = self.config.experiments
        if exp.runner == "subprocess":
            return SubprocessRunner(exp.timeout)
        return FixtureRunner(exp.fixture or "fixtures/results.json")

    @property
    def wiki(self) -> ResearchWiki:
        if self._wiki is None:
            self._wiki = ResearchWiki(self.project)
        return self._wiki

    # -- entry points ----------------------------------------------------

    def prepare(self, workflow: WorkflowDef | str, options: RunOptions | None = None) -> tuple[WorkflowDef, RunSummary]:
        options = options or RunOptions()
        wf = load_workflow(workflow, self.project) if isinstance(workflow, str) else workflow
        flags = {k: wf.flag(k) for k in FLAG_DEFAULTS}
        for key in FLAG_DEFAULTS:
            value = getattr(options, key)
            if value is not None:
                flags[key] = bool(value)
        if flags["auto_write"]:
            wf = with_chain(wf, self.project)
        effort = options.effort or self.config.effort.default
        params = apply_effort(effort_preset(effort, self.config.effort.beast_multiplier), wf.params)
        for key, value in options.params.items():
            if key == "reviewer_reasoning":
                raise InvalidValue("reviewer_reasoning is fixed and cannot be overridden")
            params[key] = value
        reviewer = resolve_route(options.reviewer, self.config.routes, self.hub.configs)
        executor = self.config.routes.executor
        run_id = options.run_id or new_run_id(wf.name)
        summary = RunSummary(
            run_id=run_id,
            workflow=wf.name,
            effort=effort,
            reviewer=reviewer,
            executor=executor,
            params=params,
            flags=flags,
            command=options.command,
            started=utcnow(),
        )
        return wf, summary

    def run(
        self,
        workflow: WorkflowDef | str,
        inputs: Mapping[str, Path | str | bytes] | None = None,
        options: RunOptions | None = None,
    ) -> RunSummary:
        wf, summary = self.prepare(workflow, options)
        if summary_path(self.project, summary.run_id).exists() or summary.run_id in self.store.runs():
            raise WorkflowError(f"run {summary.run_id!r} already exists; resume it instead")
        check_workflow(wf, self.registry, tuple(wf.inputs) + tuple(wf.optional_inputs))
        self._pin_reviewer_reasoning(summary)
        versions = self._register_inputs(wf, inputs or {})
        run = _Run(wf, summary, versions)
        self._event("run_start", run, overrides={k: v for k, v in vars(options or RunOptions()).items() if v not in (None, {}, "")})
        self._checkpoint(run, 0)
        return self._execute(run, 0)

    def resume(self, run_id: str) -> RunSummary:
        cp = self.store.resume(run_id)
        state = cp.round_state
        wf = workflow_from_dict(state["definition"])
        summary = RunSummary.from_dict(state["summary"])
        summary.steps = [s for s in summary.steps if s.index < cp.step_index]
        summary.status, summary.error, summary.finished = "running", "", ""
        summary.resumes += 1
        self.hub.restore_cursors(state.get("cursors", {}))
        self._pin_reviewer_reasoning(summary)
        run = _Run(wf, summary, dict(cp.artifact_versions), state.get("loop"))
        return self._execute(run, cp.step_index)

    # -- setup -----------------------------------------------------------

    def _pin_reviewer_reasoning(self, summary: RunSummary) -> None:
        """Reviewer calls always use the preset-independent reasoning level."""
        cfg = self.hub.configs.get(summary.reviewer)
        level = summary.params.get("reviewer_reasoning", "xhigh")
        if cfg is not None and cfg.kind == "chat" and cfg.reasoning_effort != level:
            self.hub.configs[summary.reviewer] = replace(cfg, reasoning_effort=level)

    def _register_inputs(self, wf: WorkflowDef, inputs: Mapping[str, Path | str | bytes]) -> dict[str, int]:
        versions: dict[str, int] = {}
        for name, value in inputs.items():
            if isinstance(value, Path):
                path = value if value.is_absolute() else self.project.root / value
                rec = self.store.put_artifact(name, path.read_bytes(), "input", path.suffix or ".md")
            else:
                rec = self.store.put_artifact(name, value, "input")
            versions[name] = rec.version
        missing = []
        for name in list(wf.inputs) + list(wf.optional_inputs):
            if name in versions:
                continue
            if self.store.exists(name):
                versions[name] = self.store.record(name).version
            elif name in wf.inputs:
                missing.append(ContractIssue(-1, "input", name))
        if missing:
            raise ContractViolation(missing)
        return versions

    # -- loop --------------------------------------------------------------

    def _execute(self, run: _Run, start: int) -> RunSummary:
        steps = run.wf.steps
        for index in range(start, len(steps)):
            step = steps[index]
            try:
                self._run_step(run, index, step)
            except (GateDeclined, PendingApproval, StepFailed, ContractViolation):
                raise
            self._checkpoint(run, index + 1)
            if self.halt_after_step is not None and self.halt_after_step(index):
                raise RunInterrupted(run.run_id, index)
        run.summary.status = "completed"
        self._finish(run)
        return run.summary

    def _record(self, run: _Run, index: int, step: StepDef, status: str, reason: str = "", **detail: Any) -> StepRecord:
        produced = {n: run.versions[n] for n in step.produces if n in run.versions} if status == "done" else {}
        rec = StepRecord(index, step.id, step.skill, status, reason, produced, detail)
        run.summary.steps = [s for s in run.summary.steps if s.index != index] + [rec]
        run.summary.steps.sort(key=lambda s: s.index)
        return rec

    def _skip_rest(self, run: _Run, start: int, reason: str) -> None:
        for index in range(start, len(run.wf.steps)):
            self._record(run, index, run.wf.steps[index], "skipped_by_gate", reason)

    def _stop(self, run: _Run, status: str, error: str) -> None:
        run.summary.status = status
        run.summary.error = error
        self._finish(run)

    def _finish(self, run: _Run) -> None:
        run.summary.finished = utcnow()
        payload = json.dumps(run.summary.to_dict(), indent=2, sort_keys=True) + "\n"
        atomic_write(summary_path(self.project, run.run_id), payload.encode("utf-8"))

    def _checkpoint(self, run: _Run, step_index: int) -> None:
        state = {
            "definition": workflow_to_dict(run.wf),
            "summary": run.summary.to_dict(),
            "cursors": self.hub.mock_cursors(),
            "loop": run.loop,
        }
        self.store.save_checkpoint(Checkpoint(run.run_id, run.wf.name, step_index, dict(run.versions), state))

    def _event(self, tool: str, run: _Run, **kwargs: Any) -> None:
        if self.log_events:
            meta.record(self.project, tool, run_id=run.run_id, **kwargs)

    def _ask(self, run: _Run, kind: str, payload: Mapping[str, Any]) -> str | None:
        if kind not in APPROVAL_KINDS:
            raise ValueError(f"unknown approval kind {kind!r}")
        decision = self.approver(kind, payload) if self.approver is not None else None
        if decision not in ("approved", "declined", None):
            raise ValueError(f"approver returned {decision!r}")
        if decision is not None:
            run.summary.approvals.append({"kind": kind, "step": payload.get("step", ""), "decision": decision})
            self._event(kind, run, kind="approval", success=decision == "approved", detail=str(payload.get("step", "")))
        return decision

    def _run_step(self, run: _Run, index: int, step: StepDef) -> None:
        if step.when and not run.summary.flags.get(step.when, run.params.get(step.when, False)):
            self._record(run, index, step, "skipped_by_gate", f"{step.when} is off")
            return
        if run.summary.flags.get("human_checkpoint") or step.gate == HUMAN_GATE:
            decision = self._ask(run, "human_checkpoint", {"step": step.id, "skill": step.skill, "run_id": run.run_id})
            if decision is None:
                self._skip_rest(run, index, "approval pending")
                self._stop(run, "pending_approval", f"approval pending before {step.id}")
                raise PendingApproval(step.id, "human_checkpoint", run.summary)
            if decision == "declined":
                self._skip_rest(run, index, "approval declined")
                self._stop(run, "gate_declined", f"approval declined before {step.id}")
                raise GateDeclined(step.id, run.summary)
        if step.gate in SAFETY_GATES:
            decision = evaluate_gate(step.gate, self._rebuttal_state(run))
            run.summary.gates.append(asdict(decision))
            if not decision.passed:
                self._skip_rest(run, index, f"safety gate {step.gate} failed")
                self._stop(run, "gate_failed", f"{step.gate}: {decision.reason}")
                raise SafetyGateFailed(step.id, step.gate, decision.reason, run.summary)
        missing = [c for c in step.consumes if c not in run.versions]
        if missing:
            self._record(run, index, step, "failed", "missing inputs: " + ", ".join(missing))
            self._skip_rest(run, index + 1, "an earlier step failed")
            self._stop(run, "step_failed", f"{step.id} has no {', '.join(missing)}")
            raise ContractViolation([ContractIssue(index, step.skill, m) for m in missing])
        handler = getattr(self, f"_step_{step.kind}")
        try:
            detail = handler(run, index, step) or {}
        except (PendingApproval, GateDeclined):
            raise
        except _STEP_ERRORS as exc:
            self._record(run, index, step, "failed", str(exc))
            self._skip_rest(run, index + 1, "an earlier step failed")
            self._stop(run, "step_failed", f"{step.id}: {exc}")
            self._event(step.skill, run, skill=step.skill, success=False, detail=str(exc)[:200])
            raise StepFailed(step.id, str(exc), run.summary) from exc
        self._record(run, index, step, "done", **detail)
        self._event(step.skill, run, skill=step.skill, success=True)

    # -- helpers ---------------------------------------------------------

    def _text(self, run: _Run, name: str) -> str:
        return self.store.get_text(name, run.versions[name])

    def _rel(self, run: _Run, name: str) -> str:
        return self.store.record(name, run.versions[name]).path

    def _suffix(self, run: _Run, name: str) -> str:
        return Path(self._rel(run, name)).suffix

    def _put(self, run: _Run, name: str, content: str | bytes, producer: str, suffix: str = ".md") -> str:
        rec = self.store.put_artifact(name, content, producer, suffix)
        run.versions[name] = rec.version
        return rec.path

    def _raw_files(self, run: _Run) -> dict[str, str]:
        name = "EXPERIMENT_RESULTS"
        if name not in run.versions:
            return {}
        return {f"{name}{self._suffix(run, name)}": self._text(run, name)}

    def _route(self, run: _Run) -> RouteDirective:
        s = run.summary
        return RouteDirective(s.reviewer, self.hub.family(s.executor), self.hub.family(s.reviewer))

    def _executor(self, run: _Run, step: StepDef, task: str, produce: Sequence[str], extra: str = "", names: Sequence[str] | None = None) -> str:
        spec = self.registry.resolve(step.skill)
        lines = [f"Skill: {step.skill}", f"Task: {task}"]
        if step.objective:
            lines.append(f"Objective: {step.objective}")
        lines.append("Parameters:")
        lines += [f"- {k}: {v}" for k, v in sorted(run.params.items())]
        lines.append("Inputs:")
        for name in names if names is not None else list(step.consumes) + list(step.optional_consumes):
            if name in run.versions:
                lines += [f"=== {name} ===", self._text(run, name).rstrip()]
        if step.uses_wiki:
            pack = self.wiki.write_query_pack()
            lines += ["=== QUERY_PACK ===", pack.text.rstrip()]
        if extra:
            lines.append(extra.rstrip())
        if produce:
            lines.append("Produce: " + ", ".join(produce))
            lines.append('Return each output in a fenced block tagged "artifact NAME".')
        messages = [Message("system", spec.body.strip() or spec.description), Message("user", "\n".join(lines))]
        return self.hub.send(run.summary.executor, messages, run.run_id).reply

    def _outputs(self, reply: str, produce: Sequence[str], required: bool = True) -> dict[str, str]:
        found = parse_artifacts(reply)
        if len(produce) == 1 and produce[0] not in found and required:
            found[produce[0]] = reply.strip() + "\n"
        missing = [p for p in produce if p not in found]
        if missing and required:
            raise ValueError(f"executor reply is missing {', '.join(missing)}")
        return {p: found[p] for p in produce if p in found}

    def _ingest_wiki(self, reply: str) -> int:
        outside = _ARTIFACT_BLOCK.sub("", reply)
        data = parse_block(outside, "wiki", required=False)
        if not data:
            return 0
        if not isinstance(data, list):
            raise ValueError("wiki block must be a list")
        added = 0
        for raw in data:
            kind, title = str(raw["type"]), str(raw["title"])
            node = self.wiki.find_by_title(kind, title)
            node_id = node.node_id if node else self.wiki.add_node(WikiNode(kind, title, body=str(raw.get("body", ""))))
            added += node is None
            status = raw.get("status")
            if status and self.wiki.get(node_id).status != status:
                self.wiki.set_status(node_id, str(status))
        return added

    # -- step kinds ------------------------------------------------------

    def _step_skill(self, run: _Run, index: int, step: StepDef) -> dict[str, Any]:
        reply = self._executor(run, step, "produce", step.produces)
        for name, text in self._outputs(reply, step.produces).items():
            self._put(run, name, text, step.skill)
        added = self._ingest_wiki(reply)
        return {"wiki_nodes_added": added} if added else {}

    def _step_command(self, run: _Run, index: int, step: StepDef) -> dict[str, Any]:
        code_name = step.consumes[0]
        result = self.command_runner.run(self._text(run, code_name), self.project.root)
        if result.ok:
            self._put(run, step.produces[0], result.output, step.skill, result.suffix)
            return {}
        latest = {"result": result}

        def apply_strategy(strategy: str, n: int) -> tuple[bool, str]:
            failed = latest["result"]
            extra = f"Strategy: {strategy}\nError class: {failed.error_class}\nError: {failed.message}"
            reply = self._executor(run, step, "remediate", [code_name], extra, names=[code_name])
            code = self._outputs(reply, [code_name])[code_name]
            self._put(run, code_name, code, step.skill)
            latest["result"] = self.command_runner.run(code, self.project.root)
            return latest["result"].ok, latest["result"].message

        outcome = auto_debug(
            Failure(result.error_class, result.message, self._text(run, code_name)[:2000]),
            self.config.remediation_policy(),
            self.hub,
            apply_strategy,
            self.config.error_classes,
            run.run_id,
        )
        attempts = [asdict(a) for a in outcome.attempts]
        if outcome.kind != "remediated":
            why = outcome.diagnosis or latest["result"].message
            raise RuntimeStepError(f"{outcome.kind} after {len(attempts)} attempts: {why}")
        final = latest["result"]
        self._put(run, step.produces[0], final.output, step.skill, final.suffix)
        return {"debug_attempts": attempts}

    def _step_experiment_audit(self, run: _Run, index: int, step: StepDef) -> dict[str, Any]:
        paths = [self._rel(run, n) for n in step.consumes]
        report = run_experiment_audit(paths, self.hub, run.summary.reviewer, self.project, run_id=run.run_id)
        self._put(run, step.produces[0], report.render_markdown(), step.skill)
        return {"integrity_status": report.integrity_status}

    def _step_result_to_claim(self, run: _Run, index: int, step: StepDef) -> dict[str, Any]:
        analysis = self._text(run, step.consumes[0])
        raw = parse_block(analysis, "claims", required=False)
        if not raw:
            raise ValueError(f"{step.consumes[0]} lists no claims")
        claims = load_claims(raw)
        evidence = {name: self._rel(run, name) for name in sorted(run.versions)}
        integrity = None
        if "EXPERIMENT_AUDIT" in run.versions:
            integrity = parse_audit_markdown(self._text(run, "EXPERIMENT_AUDIT"))
        judge = reviewer_judge(self.hub, run.summary.reviewer, run.run_id)
        ledger = map_result_to_claim(claims, evidence, judge, integrity, self.wiki)
        self._put(run, step.produces[0], embed_json(ledger.render_markdown(), ledger.to_json()), step.skill)
        return {"claims": len(ledger.records), "integrity_status": integrity.integrity_status if integrity else None}

    def _step_review_loop(self, run: _Run, index: int, step: StepDef) -> dict[str, Any]:
        doc, log_name = step.produces[0], step.produces[1]
        if doc not in run.versions:
            reply = self._executor(run, step, "draft", [doc])
            self._put(run, doc, self._outputs(reply, [doc])[doc], step.skill)
        p = run.params
        policy = ConvergencePolicy(float(p.get("score_threshold", 6.0)), int(p.get("review_rounds", 4)))
        scope = str(p.get("access_scope", "artifact_augmented"))
        context = str(p.get("context_policy", "fresh"))
        evidence = [self._rel(run, n) for n in step.consumes if n in run.versions and scope != "document_only"]
        threads = ThreadRegistry()
        state = None
        if run.loop and run.loop.get("step") == step.id:
            state = LoopState.from_dict(run.loop["state"])
            threads.threads = {
                tid: [Message(m["role"], m["content"]) for m in msgs] for tid, msgs in run.loop.get("threads", {}).items()
            }
            # continue numbering so resumed rounds never reuse a thread id
            threads.counter = max((int(r.thread_id.rsplit("-", 1)[1]) for r in state.history if r.thread_id), default=0)
        engine = ReviewEngine(self.hub, self.project, policy, self.config.scope_patterns, threads=threads, run_id=run.run_id)
        objective = step.objective or f"Review {doc} for soundness."
        request = ReviewRequest(objective, (self._rel(run, doc), *evidence), scope, context, self._route(run))

        def revise(state: LoopState, result: ReviewResult) -> Revision:
            items = "\n".join(f"- [{i.id}] {i.severity}: {i.description}" for i in result.action_items) or "- (none)"
            extra = f"Round: {result.round}\nScore: {result.score}\nAction items:\n{items}\nReturn the ids you resolved in a fenced resolved block."
            reply = self._executor(run, step, "revise", [doc], extra, names=[doc])
            new = self._outputs(reply, [doc], required=False).get(doc)
            if new is not None:
                self._put(run, doc, new, step.skill)
            resolved = parse_block(reply, "resolved", required=False) or []
            return Revision(tuple(str(x) for x in resolved), (self._rel(run, doc), *evidence))

        def on_round(state: LoopState) -> None:
            last = state.history[-1]
            self._event("review", run, kind="review_score", skill=step.skill, score=last.score, detail=state.decisions[-1])
            run.loop = {
                "step": step.id,
                "state": state.to_dict(),
                "threads": {tid: [asdict(m) for m in msgs] for tid, msgs in threads.threads.items() if msgs},
            }
            self._checkpoint(run, index)

        state = engine.run_loop(request, revise, state, on_round)
        run.loop = None
        self._put(run, log_name, render_review_log(engine.resolved_view(state), state), step.skill)
        run.summary.review = {"step": step.id, "rounds": state.round, "scores": state.scores, "outcome": state.outcome}
        return {"rounds": state.round, "scores": state.scores, "outcome": state.outcome}

    def _step_figure(self, run: _Run, index: int, step: StepDef) -> dict[str, Any]:
        extra = "Describe the figure as JSON in a fenced figure block."
        reply = self._executor(run, step, "produce", [], extra)
        doc = parse_block(reply, "figure")
        spec, issues = validate_spec(doc)
        if spec is None:
            raise ValueError("figure spec is invalid: " + "; ".join(str(i) for i in issues))
        self._put(run, step.produces[0], render(spec), step.skill, ".svg")
        return {"nodes": len(spec.nodes), "edges": len(spec.edges)}

    def _step_write(self, run: _Run, index: int, step: StepDef) -> dict[str, Any]:
        draft_name, report_name = step.produces[0], step.produces[1]
        reply = self._executor(run, step, "produce", [draft_name])
        draft = self._outputs(reply, [draft_name])[draft_name]
        terms = load_terminology(self.config.terminology or None)
        text, report = run_editing_passes(draft, self.hub, run.summary.executor, terms, self._raw_files(run), run.run_id)
        self._put(run, draft_name, text, step.skill)
        self._put(run, report_name, embed_json(report.render_markdown(), report.to_json()), step.skill)
        return {}

    def _step_proof_check(self, run: _Run, index: int, step: StepDef) -> dict[str, Any]:
        taxonomy = load_taxonomy(self.config.proof_taxonomy or None)
        ledger = build_proof_ledger(self._text(run, step.consumes[0]), self.hub, run.summary.reviewer, taxonomy, run.run_id)
        self._put(run, step.produces[0], embed_json(ledger.render_markdown(taxonomy), ledger.to_json()), step.skill)
        return {"obligations": len(ledger.obligations)}

    def _step_claim_audit(self, run: _Run, index: int, step: StepDef) -> dict[str, Any]:
        draft = self._text(run, step.consumes[0])
        ledger = None
        if "CLAIM_LEDGER" in run.versions:
            ledger = ClaimLedger.from_json(extract_json(self._text(run, "CLAIM_LEDGER")))
        raw = self._raw_files(run)
        paths = [self._rel(run, step.consumes[0])] + ([self._rel(run, "EXPERIMENT_RESULTS")] if raw else [])
        entries = audit_paper_claims(draft, ledger, raw, self.hub, run.summary.reviewer, paths, run.run_id)
        data = [e.to_dict() for e in entries]
        self._put(run, step.produces[0], embed_json(render_audit(entries), data), step.skill)
        counts: dict[str, int] = {}
        for e in entries:
            counts[e.status] = counts.get(e.status, 0) + 1
        return {"statuses": counts}

    def _step_compile(self, run: _Run, index: int, step: StepDef) -> dict[str, Any]:
        self._put(run, step.produces[0], compile_stub(self._text(run, step.consumes[0])), step.skill)
        return {"engine": "stub"}

    def _step_improvement_loop(self, run: _Run, index: int, step: StepDef) -> dict[str, Any]:
        report_name, draft_name, compiled_name = step.produces
        rounds = int(run.params.get("improvement_rounds", 2))
        engine = ReviewEngine(self.hub, self.project, scope_patterns=self.config.scope_patterns, run_id=run.run_id)
        objective = step.objective or "Review the compiled paper."
        results = []
        for r in range(1, rounds + 1):
            request = ReviewRequest(objective, (self._rel(run, compiled_name),), "document_only", "fresh", self._route(run))
            result = engine.run_round(request, r)
            results.append(result)
            self._event("review", run, kind="review_score", skill=step.skill, score=result.score, detail=f"round {r}")
            items = "\n".join(f"- [{i.id}] {i.severity}: {i.description}" for i in result.action_items) or "- (none)"
            extra = f"Round: {r}\nScore: {result.score}\nAction items:\n{items}"
            reply = self._executor(run, step, "revise", [draft_name], extra, names=[draft_name])
            new = self._outputs(reply, [draft_name], required=False).get(draft_name)
            if new is not None:
                self._put(run, draft_name, new, step.skill)
            self._put(run, compiled_name, compile_stub(self._text(run, draft_name)), step.skill)
        self._put(run, report_name, render_improvement(results), step.skill)
        return {"rounds": rounds, "scores": [r.score for r in results]}

    def _step_citation_audit(self, run: _Run, index: int, step: StepDef) -> dict[str, Any]:
        tex = self._text(run, step.consumes[0])
        bib = self._text(run, "BIBLIOGRAPHY") if "BIBLIOGRAPHY" in run.versions else ""
        entries = audit_citations(candidates_from_sources(bib, tex), self.hub, run.summary.reviewer, run_id=run.run_id)
        lines = [render_citation_audit(entries).rstrip(), "", "## Decisions", ""]
        pending = 0
        for e in entries:
            if e.recommendation == "KEEP":
                continue
            decision = self._ask(run, "citation_decision", {"step": step.id, "cite_key": e.cite_key, "recommendation": e.recommendation})
            pending += decision is None
            lines.append(f"- {e.cite_key}: {e.recommendation} {decision or 'pending'}")
        self._put(run, step.produces[0], "\n".join(lines) + "\n", step.skill)
        return {"entries": len(entries), "pending_decisions": pending}

    def _step_rebuttal_phase(self, run: _Run, index: int, step: StepDef) -> dict[str, Any]:
        phase = step.options.get("phase")
        out = step.produces[0]
        if phase == "parse_reviews":
            points = parse_reviews(self._text(run, step.consumes[0]))
            self._put(run, out, render_points(points), step.skill)
            return {"points": len(points)}
        if phase == "classify_concerns":
            points = [classify(p) for p in read_points(self._text(run, step.consumes[0]))]
            self._put(run, out, render_points(points), step.skill)
            return {}
        if phase in ("plan_responses", "draft_rebuttal", "tone_polish"):
            reply = self._executor(run, step, phase, [out])
            self._put(run, out, self._outputs(reply, [out])[out], step.skill)
            return {}
        if phase == "assemble":
            text = re.sub(r"\n{3,}", "\n\n", "\n".join(l.rstrip() for l in self._text(run, step.consumes[0]).splitlines())).strip() + "\n"
            limit = int(run.params.get("char_limit", 5000))
            if len(text) > limit:
                raise ValueError(f"rebuttal is {len(text)} characters, the limit is {limit}")
            self._put(run, out, text, step.skill)
            return {"chars": len(text)}
        if phase == "stress_test":
            system = load_shared_reference("reviewer-independence").content
            user = build_user_prompt(step.objective or "Stress-test the rebuttal.", [self._rel(run, n) for n in step.consumes])
            reply = self.hub.send(run.summary.reviewer, [Message("system", system), Message("user", user)], run.run_id).reply
            parsed = parse_review_reply(reply)
            lines = ["# Stress test", "", f"Score: {parsed.score}", ""]
            lines += [f"- [{i.id}] {i.severity}: {i.description}" for i in parsed.items] or ["No remaining issues raised."]
            self._put(run, out, "\n".join(lines) + "\n", step.skill)
            return {"score": parsed.score}
        raise ValueError(f"unknown rebuttal phase {phase!r}")

    def _rebuttal_state(self, run: _Run) -> RebuttalState:
        def text(name: str) -> str:
            return self._text(run, name) if name in run.versions else ""

        source = "CONCERN_MAP" if "CONCERN_MAP" in run.versions else "REVIEW_POINTS"
        banned = run.params.get("banned_phrases") or DEFAULT_BANNED_PHRASES
        return RebuttalState(
            points=read_points(text(source)),
            paper=text("PAPER_DRAFT"),
            evidence=text("EVIDENCE"),
            reviews=text("REVIEWS"),
            draft=text("REBUTTAL_DRAFT"),
            polished=text("REBUTTAL_POLISHED"),
            rebuttal=text("REBUTTAL"),
            banned_phrases=tuple(banned),
        )


class RuntimeStepError(WorkflowError):
    """A step could not complete after remediation."""


def render_review_log(history: Sequence[ReviewResult], state: LoopState) -> str:
    lines = ["# Auto review", "", f"Outcome: {state.outcome} after {state.round} rounds", ""]
    lines += ["| round | score | decision | thread |", "|---|---|---|---|"]
    for result, decision in zip(history, state.decisions):
        lines.append(f"| {result.round} | {result.score} | {decision} | {result.thread_id} |")
    for result in history:
        lines += ["", f"## Round {result.round}", ""]
        if not result.action_items:
            lines.append("No action items.")
        for i in result.action_items:
            lines.append(f"- [{i.id}] {i.severity} ({'resolved' if i.resolved else 'open'}): {i.description}")
    lines.append("")
    return "\n".join(lines)


def render_improvement(results: Sequence[ReviewResult]) -> str:
    lines = ["# Paper improvement loop", "", "| round | score | items |", "|---|---|---|"]
    lines += [f"| {r.round} | {r.score} | {len(r.action_items)} |" for r in results]
    for r in results:
        lines += ["", f"## Round {r.round}", ""]
        lines += [f"- [{i.id}] {i.severity}: {i.description}" for i in r.action_items] or ["No action items."]
    lines.append("")
    return "\n".join(lines)


def run_workflow(
    workflow: WorkflowDef | str,
    inputs: Mapping[str, Path | str | bytes],
    project: Project | str | Path,
    options: RunOptions | None = None,
    **runner_kwargs: Any,
) -> RunSummary:
    return WorkflowRunner(project, **runner_kwargs).run(workflow, inputs, options)
