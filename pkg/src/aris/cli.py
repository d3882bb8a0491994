"""Command line and REPL.

Exit codes: 0 ok, 1 error, 2 gate declined or failed, 3 approval pending,
4 step failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import shlex
import shutil
import sys
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence, TextIO

import yaml

from . import meta
from .bridges import DEFAULT_BRIDGES, CostReport, RouteConfig, cost_report
from .config import EFFORT_NAMES, ArisConfig, load_config, mock_only_config, save_config
from .errors import (
    ArisError,
    BadDirective,
    GateDeclined,
    InvalidValue,
    IoFailure,
    PendingApproval,
    StepFailed,
    UnknownVerb,
)
from .figures import render, validate_spec
from .orchestrator.directives import extract_directives
from .orchestrator.runner import RunOptions, RunSummary, WorkflowRunner, load_summary
from .orchestrator.workflows import WORKFLOW_NAMES, check_workflow, list_workflows, load_workflow, single_step_workflow, workflow_from_data
from .skills import SkillRegistry, parse_skill
from .store import Project

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_GATE_DECLINED = 2
EXIT_PENDING = 3
EXIT_STEP_FAILED = 4

APPROVAL_KINDS = ("human_checkpoint", "patch_accept", "citation_decision")
BUILTINS = ("help", "skills", "workflows", "cost", "status", "resume", "quit", "exit")
_ENV_NAME = re.compile(r"^[A-Z_][A-Z0-9_]*$")


# -- commands --------------------------------------------------------------


@dataclass
class Command:
    verb: str
    target: str  # builtin | workflow | skill
    args: list[str] = field(default_factory=list)
    directives: dict[str, Any] = field(default_factory=dict)
    unknown_directives: list[str] = field(default_factory=list)
    raw: str = ""


def parse_command(line: str, registry: SkillRegistry, workflows: Iterable[str] = WORKFLOW_NAMES) -> Command:
    """``/verb args key: value ...``; the verb must be a built-in, a workflow or a skill."""
    raw = line
    text = line.strip()
    if not text:
        raise UnknownVerb("empty command")
    if text.startswith("/"):
        text = text[1:]
    verb, _, rest = text.partition(" ")
    if verb in BUILTINS:
        target = "builtin"
    elif verb in set(workflows):
        target = "workflow"
    elif verb in registry:
        target = "skill"
    else:
        raise UnknownVerb(f"unknown command /{verb}")
    try:
        parsed = extract_directives(rest)
    except InvalidValue as exc:
        raise BadDirective(str(exc)) from exc
    try:
        args = shlex.split(parsed.remainder)
    except ValueError as exc:
        raise BadDirective(f"could not split arguments: {exc}") from exc
    return Command(verb, target, args, parsed.as_dict(), parsed.unknown, raw)


# -- approvals -------------------------------------------------------------


def describe_payload(kind: str, payload: Mapping[str, Any]) -> str:
    if kind == "human_checkpoint":
        return f"Run step {payload.get('step')} ({payload.get('skill')})?"
    if kind == "citation_decision":
        return f"Apply {payload.get('recommendation')} to citation {payload.get('cite_key')}?"
    if kind == "patch_accept":
        return f"Apply proposal {payload.get('proposal')} to {payload.get('target')} (score {payload.get('score')})?"
    return f"Approve {kind}?"


def approval_prompt(
    kind: str,
    payload: Mapping[str, Any],
    *,
    interactive: bool,
    auto_approve: Iterable[str] = (),
    input_fn: Callable[[str], str] = input,
    out: TextIO | None = None,
) -> str | None:
    """``approved``, ``declined``, or None when nobody can answer (non-interactive)."""
    if kind not in APPROVAL_KINDS:
        raise ValueError(f"unknown approval kind {kind!r}")
    out = out or sys.stdout
    question = describe_payload(kind, payload)
    if kind in set(auto_approve):
        print(f"{question} approved by --yes flag", file=out)
        return "approved"
    if not interactive:
        print(f"{question} pending (non-interactive)", file=out)
        return None
    try:
        answer = input_fn(f"{question} [y/N] ")
    except EOFError:
        return None
    return "approved" if answer.strip().lower() in ("y", "yes") else "declined"


def make_approver(interactive: bool, auto_approve: Iterable[str], out: TextIO, input_fn: Callable[[str], str] = input):
    auto = tuple(auto_approve)

    def approver(kind: str, payload: Mapping[str, Any]) -> str | None:
        return approval_prompt(kind, payload, interactive=interactive, auto_approve=auto, input_fn=input_fn, out=out)

    return approver


# -- cost ------------------------------------------------------------------

COST_COLUMNS = ("bridge", "calls", "prompt_tokens", "completion_tokens", "cost")


def render_cost_table(report: CostReport) -> str:
    rows = [
        (bid, str(c.calls), str(c.prompt_tokens), str(c.completion_tokens), str(c.cost))
        for bid, c in report.per_bridge.items()
    ]
    t = report.total
    rows.append(("TOTAL", str(t.calls), str(t.prompt_tokens), str(t.completion_tokens), str(t.cost)))
    widths = [max(len(COST_COLUMNS[i]), *(len(r[i]) for r in rows)) for i in range(len(COST_COLUMNS))]

    def fmt(row: Sequence[str]) -> str:
        cells = [row[0].ljust(widths[0])] + [row[i].rjust(widths[i]) for i in range(1, len(row))]
        return "  ".join(cells).rstrip()

    lines = [fmt(COST_COLUMNS), "  ".join("-" * w for w in widths)]
    lines += [fmt(r) for r in rows]
    return "\n".join(lines) + "\n"


def parse_cost_table(text: str) -> dict[str, tuple[int, int, int, str]]:
    """Rows of a rendered table keyed by bridge; the inverse used by tests and scripts."""
    out = {}
    for line in text.splitlines()[2:]:
        parts = line.split()
        if len(parts) == 5:
            out[parts[0]] = (int(parts[1]), int(parts[2]), int(parts[3]), parts[4])
    return out


# -- wizard ----------------------------------------------------------------


def backup_config(project: Project) -> Path | None:
    path = project.config_path
    if not path.exists():
        return None
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S")
    target = path.with_name(f"config.toml.bak-{stamp}")
    n = 1
    while target.exists():
        n += 1
        target = path.with_name(f"config.toml.bak-{stamp}-{n}")
    shutil.copy2(path, target)
    return target


def _ask(input_fn: Callable[[str], str], question: str, default: str) -> str:
    try:
        answer = input_fn(f"{question} [{default}] ").strip()
    except EOFError:
        answer = ""
    return answer or default


def wizard(project: Project, input_fn: Callable[[str], str] = input, out: TextIO | None = None) -> Path:
    """Write ``.aris/config.toml`` from answers; an existing config is backed up first."""
    out = out or sys.stdout
    use_network = _ask(input_fn, "Configure network model bridges?", "y").lower() in ("y", "yes")
    if not use_network:
        config = mock_only_config()
    else:
        config = ArisConfig(bridges=dict(DEFAULT_BRIDGES))
        names = ", ".join(sorted(config.bridges))
        reviewer = _ask(input_fn, f"Default reviewer bridge ({names})", "codex")
        executor = _ask(input_fn, f"Executor bridge ({names})", "claude")
        config.routes = RouteConfig(default_review=reviewer, executor=executor)
        for bid in sorted(config.bridges):
            bridge = config.bridges[bid]
            while True:
                env = _ask(input_fn, f"Environment variable holding the {bid} key", bridge.auth_env)
                if _ENV_NAME.match(env):
                    break
                print("Enter the variable's name, not the key itself.", file=out)
            config.bridges[bid] = replace(bridge, auth_env=env)
    while True:
        effort = _ask(input_fn, f"Default effort ({', '.join(EFFORT_NAMES)})", "balanced")
        if effort in EFFORT_NAMES:
            break
        print(f"Unknown preset {effort!r}.", file=out)
    config.effort.default = effort
    config.user_skills = _ask(input_fn, "User skills directory", config.user_skills)
    backup = backup_config(project)
    if backup is not None:
        print(f"Previous config saved to {project.relpath(backup)}", file=out)
    try:
        path = save_config(project, config)
    except OSError as exc:
        raise IoFailure(f"could not write config: {exc}") from exc
    print(f"Wrote {project.relpath(path)}", file=out)
    return path


# -- running ---------------------------------------------------------------


@dataclass
class Session:
    project: Project
    config: ArisConfig
    registry: SkillRegistry
    interactive: bool
    auto_approve: tuple[str, ...] = ()
    out: TextIO = sys.stdout
    input_fn: Callable[[str], str] = input
    last_run: str | None = None

    def runner(self) -> WorkflowRunner:
        return WorkflowRunner(
            self.project,
            self.config,
            registry=self.registry,
            approver=make_approver(self.interactive, self.auto_approve, self.out, self.input_fn),
        )


def open_session(
    project_dir: str | Path,
    *,
    mock: bool = False,
    interactive: bool | None = None,
    auto_approve: Iterable[str] = (),
    out: TextIO | None = None,
    input_fn: Callable[[str], str] = input,
) -> Session:
    project = Project(project_dir)
    config = mock_only_config() if mock else load_config(project)
    user_root = Path(config.user_skills).expanduser() if config.user_skills else None
    registry = SkillRegistry.discover(user_root=user_root, project_root=project.skills_dir)
    if interactive is None:
        interactive = sys.stdin.isatty()
    return Session(project, config, registry, interactive, tuple(auto_approve), out or sys.stdout, input_fn)


def map_inputs(args: Sequence[str], required: Sequence[str], optional: Sequence[str] = ()) -> dict[str, Path]:
    """``NAME=path`` pairs, or bare paths bound to the required then optional inputs in order."""
    out: dict[str, Path] = {}
    slots = list(required) + list(optional)
    bare = []
    for arg in args:
        name, eq, value = arg.partition("=")
        if eq and re.match(r"^[A-Z][A-Z0-9_]*$", name):
            out[name] = Path(value).resolve()
        else:
            bare.append(Path(arg).resolve())
    free = [n for n in slots if n not in out]
    if len(bare) > len(free):
        raise BadDirective(f"{len(bare)} positional inputs but only {len(free)} input slots ({', '.join(slots) or 'none'})")
    for name, path in zip(free, bare):
        out[name] = path
    for name, path in out.items():
        if not path.is_file():
            raise IoFailure(f"input {name}: {path} is not a file")
    return out


def print_summary(summary: RunSummary, out: TextIO) -> None:
    print(f"run {summary.run_id}: {summary.workflow} {summary.status}", file=out)
    for s in summary.steps:
        note = f" ({s.reason})" if s.reason else ""
        print(f"  [{s.index}] {s.step_id}: {s.status}{note}", file=out)
    if summary.review:
        scores = ", ".join(f"{x:g}" for x in summary.review["scores"])
        print(f"  review: {summary.review['outcome']} after {summary.review['rounds']} rounds ({scores})", file=out)
    if summary.error:
        print(f"  error: {summary.error}", file=out)


def _exit_for(exc: BaseException) -> int:
    if isinstance(exc, PendingApproval):
        return EXIT_PENDING
    if isinstance(exc, GateDeclined):
        return EXIT_GATE_DECLINED
    if isinstance(exc, StepFailed):
        return EXIT_STEP_FAILED
    return EXIT_ERROR


def execute(session: Session, call: Callable[[WorkflowRunner], RunSummary]) -> int:
    out = session.out
    try:
        summary = call(session.runner())
    except (PendingApproval, GateDeclined, StepFailed) as exc:
        print(f"stopped: {exc}", file=out)
        if exc.summary is not None:
            session.last_run = exc.summary.run_id
            print_summary(exc.summary, out)
        return _exit_for(exc)
    session.last_run = summary.run_id
    print_summary(summary, out)
    return EXIT_OK


def run_command(session: Session, cmd: Command, run_id: str | None = None, params: Mapping[str, Any] | None = None) -> int:
    if cmd.target == "workflow":
        wf = load_workflow(cmd.verb, session.project)
    else:
        wf = single_step_workflow(cmd.verb, session.project)
    if cmd.unknown_directives:
        print(f"ignored unknown directives: {', '.join(cmd.unknown_directives)}", file=session.out)
    inputs = map_inputs(cmd.args, wf.inputs, wf.optional_inputs)
    options = RunOptions.from_directives(cmd.directives, params=dict(params or {}), run_id=run_id, command=cmd.raw)
    return execute(session, lambda r: r.run(wf, inputs, options))


# -- repl ------------------------------------------------------------------

HELP = """Commands:
  /<workflow> [inputs] [directives]   run a workflow (inputs as NAME=path or paths)
  /<skill> [inputs] [directives]      run one skill
  /skills [category]                  list skills
  /workflows                          list workflows
  /cost [run_id]                      token and cost table
  /status [run_id]                    show a run summary
  /resume <run_id>                    continue a stopped run
  /quit
Directives: effort: lite|balanced|max|beast  reviewer: <route>  human_checkpoint: true  auto_write: true"""


def repl(session: Session, lines: Iterable[str] | None = None) -> int:
    out = session.out
    print("aris repl; /help for commands", file=out)
    status = EXIT_OK
    source = lines if lines is not None else _stdin_lines(session)
    workflows = list_workflows(session.project)
    for line in source:
        if not line.strip():
            continue
        try:
            cmd = parse_command(line, session.registry, workflows)
        except (UnknownVerb, BadDirective) as exc:
            print(f"error: {exc}", file=out)
            status = EXIT_ERROR
            continue
        if cmd.verb in ("quit", "exit"):
            break
        try:
            status = _repl_dispatch(session, cmd)
        except ArisError as exc:
            print(f"error: {exc}", file=out)
            status = EXIT_ERROR
    return status


def _stdin_lines(session: Session):
    while True:
        try:
            yield session.input_fn("aris> ")
        except EOFError:
            return


def _repl_dispatch(session: Session, cmd: Command) -> int:
    out = session.out
    if cmd.verb == "help":
        print(HELP, file=out)
    elif cmd.verb == "skills":
        for name, cat, desc in session.registry.list_skills(cmd.args[0] if cmd.args else None):
            print(f"{name:<30} {cat:<16} {desc}", file=out)
    elif cmd.verb == "workflows":
        for name in list_workflows(session.project):
            print(name, file=out)
    elif cmd.verb == "cost":
        out.write(render_cost_table(cost_report(session.project, cmd.args[0] if cmd.args else None)))
    elif cmd.verb == "status":
        run_id = cmd.args[0] if cmd.args else session.last_run
        if not run_id:
            print("no run yet", file=out)
            return EXIT_ERROR
        print_summary(load_summary(session.project, run_id), out)
    elif cmd.verb == "resume":
        if not cmd.args:
            print("usage: /resume <run_id>", file=out)
            return EXIT_ERROR
        return execute(session, lambda r: r.resume(cmd.args[0]))
    else:
        return run_command(session, cmd)
    return EXIT_OK


# -- validate --------------------------------------------------------------


def validate_paths(session: Session, paths: Sequence[str]) -> list[str]:
    """Problems found; empty means everything checked is valid."""
    problems: list[str] = []
    if not paths:
        try:
            session.config.validate()
        except ValueError as exc:
            problems.append(f"config: {exc}")
        for name in list_workflows(session.project):
            try:
                wf = load_workflow(name, session.project)
                check_workflow(wf, session.registry, tuple(wf.inputs) + tuple(wf.optional_inputs))
            except (ArisError, ValueError) as exc:
                problems.append(f"workflow {name}: {exc}")
        return problems
    for raw in paths:
        path = Path(raw)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            problems.append(f"{raw}: {exc}")
            continue
        if path.suffix == ".json":
            try:
                doc = json.loads(text)
            except ValueError as exc:
                problems.append(f"{raw}: not JSON: {exc}")
                continue
            _, issues = validate_spec(doc)
            problems += [f"{raw}: {i}" for i in issues]
        elif path.suffix == ".md":
            try:
                parse_skill(text, path=path)
            except ArisError as exc:
                problems.append(f"{raw}: {exc}")
        elif path.suffix in (".yaml", ".yml"):
            try:
                wf = workflow_from_data(yaml.safe_load(text), session.project)
                check_workflow(wf, session.registry, tuple(wf.inputs) + tuple(wf.optional_inputs))
            except (ArisError, ValueError, yaml.YAMLError) as exc:
                problems.append(f"{raw}: {exc}")
        else:
            problems.append(f"{raw}: unsupported file type")
    return problems


# -- argparse --------------------------------------------------------------


def _add_approval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--yes-checkpoint", action="store_true", help="approve every human checkpoint")
    p.add_argument("--yes-citation", action="store_true", help="approve every citation recommendation")
    p.add_argument("--non-interactive", action="store_true", help="never prompt; pending approvals exit with 3")


def _auto(args: argparse.Namespace) -> list[str]:
    out = []
    if getattr(args, "yes_checkpoint", False):
        out.append("human_checkpoint")
    if getattr(args, "yes_citation", False):
        out.append("citation_decision")
    if getattr(args, "yes_patch", False):
        out.append("patch_accept")
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aris", description="Research harness: workflows, review loops and assurance.")
    parser.add_argument("-C", "--project", default=".", help="project directory (default: current)")
    parser.add_argument("--mock", action="store_true", help="use the offline mock bridges regardless of config")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("repl", help="interactive slash-command session")
    _add_approval_flags(p)

    p = sub.add_parser("run", help="run a workflow or a single skill")
    p.add_argument("workflow")
    p.add_argument("args", nargs="*", help="inputs (NAME=path or paths) and directives such as 'effort: max'")
    p.add_argument("--run-id")
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE", help="override a workflow parameter")
    _add_approval_flags(p)

    p = sub.add_parser("resume", help="continue a stopped run from its last checkpoint")
    p.add_argument("run_id")
    _add_approval_flags(p)

    p = sub.add_parser("status", help="show a run summary")
    p.add_argument("run_id")

    p = sub.add_parser("render", help="render a figure spec to SVG")
    p.add_argument("spec")
    p.add_argument("-o", "--output", help="output path (default: stdout)")

    p = sub.add_parser("validate", help="check figure specs, skill files or workflows (all workflows when no path)")
    p.add_argument("paths", nargs="*")

    p = sub.add_parser("cost", help="token and cost table")
    p.add_argument("--run", help="one run (default: all runs)")

    p = sub.add_parser("skills", help="list skills")
    p.add_argument("--category")

    p = sub.add_parser("wizard", help="write the project config interactively")

    p = sub.add_parser("meta", help="usage analysis and gated skill patches")
    msub = p.add_subparsers(dest="meta_command", required=True)
    msub.add_parser("analyze", help="summarize the event log")
    msub.add_parser("list", help="list patch proposals")
    q = msub.add_parser("propose", help="record a proposed edit to a skill file")
    q.add_argument("target")
    q.add_argument("new_content", help="file holding the proposed new content")
    q.add_argument("--rationale", required=True)
    q = msub.add_parser("gate", help="have the reviewer score a proposal")
    q.add_argument("proposal")
    q.add_argument("--reviewer")
    q = msub.add_parser("accept", help="apply a surfaced proposal")
    q.add_argument("proposal")
    q.add_argument("--yes-patch", action="store_true", help="approve without prompting")
    q.add_argument("--non-interactive", action="store_true")
    q = msub.add_parser("decline", help="reject a proposal")
    q.add_argument("proposal")
    return parser


def _params(pairs: Sequence[str]) -> dict[str, Any]:
    out = {}
    for pair in pairs:
        key, eq, value = pair.partition("=")
        if not eq:
            raise BadDirective(f"--param expects KEY=VALUE, got {pair!r}")
        out[key.strip()] = yaml.safe_load(value)
    return out


def main(argv: Sequence[str] | None = None, *, out: TextIO | None = None, input_fn: Callable[[str], str] = input) -> int:
    args = build_parser().parse_args(argv)
    out = out or sys.stdout
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _main(args, out, input_fn)
    except (ArisError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=out)
        return EXIT_ERROR


def _main(args: argparse.Namespace, out: TextIO, input_fn: Callable[[str], str]) -> int:
    project = Path(args.project)
    if args.command == "wizard":
        wizard(Project(project), input_fn, out)
        return EXIT_OK
    if args.command == "render":
        doc = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        spec, issues = validate_spec(doc)
        if spec is None:
            for issue in issues:
                print(f"error: {issue}", file=out)
            return EXIT_ERROR
        data = render(spec)
        if args.output:
            Path(args.output).write_bytes(data)
        else:
            out.write(data.decode("utf-8"))
        return EXIT_OK

    interactive = None if not getattr(args, "non_interactive", False) else False
    session = open_session(project, mock=args.mock, interactive=interactive, auto_approve=_auto(args), out=out, input_fn=input_fn)

    if args.command == "repl":
        return repl(session)
    if args.command == "run":
        line = " ".join(["/" + args.workflow] + [shlex.quote(a) if " " in a and ":" not in a else a for a in args.args])
        cmd = parse_command(line, session.registry, list_workflows(session.project))
        if cmd.target == "builtin":
            raise UnknownVerb(f"{args.workflow} is not a workflow or skill")
        return run_command(session, cmd, args.run_id, _params(args.param))
    if args.command == "resume":
        return execute(session, lambda r: r.resume(args.run_id))
    if args.command == "status":
        print_summary(load_summary(session.project, args.run_id), out)
        return EXIT_OK
    if args.command == "validate":
        problems = validate_paths(session, args.paths)
        for p in problems:
            print(p, file=out)
        if not problems:
            print("ok", file=out)
        return EXIT_ERROR if problems else EXIT_OK
    if args.command == "cost":
        out.write(render_cost_table(cost_report(session.project, args.run)))
        return EXIT_OK
    if args.command == "skills":
        for name, cat, desc in session.registry.list_skills(args.category):
            print(f"{name:<30} {cat:<16} {desc}", file=out)
        return EXIT_OK
    if args.command == "meta":
        return _meta(session, args)
    raise UnknownVerb(args.command)


def _meta(session: Session, args: argparse.Namespace) -> int:
    project, out = session.project, session.out
    if args.meta_command == "analyze":
        events, warnings = meta.read_events(project)
        for w in warnings:
            print(f"warning: {w}", file=out)
        print(meta.summarize_findings(meta.analyze(events, session.config.meta)), file=out)
        return EXIT_OK
    if args.meta_command == "list":
        for p in meta.list_proposals(project):
            score = "-" if p.reviewer_score is None else f"{p.reviewer_score:g}"
            print(f"{p.proposal_id}  {p.state:<9} {score:>4}  {p.target}", file=out)
        return EXIT_OK
    if args.meta_command == "propose":
        content = Path(args.new_content).read_text(encoding="utf-8")
        proposal = meta.propose_patch(project, args.target, content, args.rationale)
        print(f"proposed {proposal.proposal_id} for {proposal.target}", file=out)
        return EXIT_OK
    if args.meta_command == "gate":
        reviewer = args.reviewer or session.config.routes.default_review
        gated = meta.gate_proposal(project, meta.load_proposal(project, args.proposal), session.config.hub(project), reviewer)
        print(f"{gated.proposal_id}: {gated.state} (score {gated.reviewer_score:g})", file=out)
        return EXIT_OK
    if args.meta_command == "accept":
        proposal = meta.load_proposal(project, args.proposal)
        payload = {"proposal": proposal.proposal_id, "target": proposal.target, "score": proposal.reviewer_score}
        interactive = session.interactive and not args.non_interactive
        decision = approval_prompt(
            "patch_accept", payload, interactive=interactive, auto_approve=_auto(args), input_fn=session.input_fn, out=out
        )
        if decision is None:
            return EXIT_PENDING
        if decision == "declined":
            meta.record(project, "meta-accept", kind="approval", success=False, detail=proposal.proposal_id)
            print(f"{proposal.proposal_id} left {proposal.state}", file=out)
            return EXIT_GATE_DECLINED
        accepted = meta.accept_proposal(project, proposal.proposal_id)
        print(f"{accepted.proposal_id}: accepted; {accepted.target} updated", file=out)
        return EXIT_OK
    if args.meta_command == "decline":
        declined = meta.decline_proposal(project, args.proposal)
        print(f"{declined.proposal_id}: {declined.state}", file=out)
        return EXIT_OK
    raise UnknownVerb(args.meta_command)


if __name__ == "__main__":
    sys.exit(main())
