"""Workflow definitions loaded from YAML data files.

Bundled definitions live in ``aris/assets/workflows``; a project file at
``.aris/workflows/<name>.yaml`` replaces the bundled one of the same name.
A definition either lists ``steps`` or ``compose``s other workflows in order.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

import yaml

from .._assets import asset
from ..errors import ContractViolation, DanglingSkillReference, InvalidValue, UnknownWorkflow
from ..skills import SkillRegistry
from ..store import Project, validate_contracts
from .effort import TaggedParam

WORKFLOW_NAMES = (
    "idea_discovery",
    "experiment_bridge",
    "auto_review_loop",
    "paper_writing",
    "rebuttal",
    "research_pipeline",
)
STEP_KINDS = (
    "skill",
    "command",
    "experiment_audit",
    "result_to_claim",
    "review_loop",
    "figure",
    "write",
    "proof_check",
    "claim_audit",
    "compile",
    "improvement_loop",
    "citation_audit",
    "rebuttal_phase",
)
HUMAN_GATE = "human"
SAFETY_GATES = ("claims-check", "tone-check", "evidence-check")
FLAG_DEFAULTS = {"human_checkpoint": False, "auto_write": False}


@dataclass(frozen=True)
class StepDef:
    id: str
    skill: str
    kind: str = "skill"
    consumes: tuple[str, ...] = ()
    produces: tuple[str, ...] = ()
    optional_consumes: tuple[str, ...] = ()
    gate: str | None = None
    when: str | None = None
    objective: str = ""
    uses_wiki: bool = False
    options: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in STEP_KINDS:
            raise InvalidValue(f"step {self.id!r}: unknown kind {self.kind!r}")
        if self.gate is not None and self.gate != HUMAN_GATE and self.gate not in SAFETY_GATES:
            raise InvalidValue(f"step {self.id!r}: unknown gate {self.gate!r}")
        if "\n" in self.objective.strip():
            raise InvalidValue(f"step {self.id!r}: the objective must be one line")


@dataclass(frozen=True)
class WorkflowDef:
    name: str
    steps: tuple[StepDef, ...]
    params: Mapping[str, TaggedParam] = field(default_factory=dict)
    inputs: tuple[str, ...] = ()
    optional_inputs: tuple[str, ...] = ()
    flags: Mapping[str, bool] = field(default_factory=dict)
    description: str = ""
    # workflow appended when ``auto_write`` is on
    chain: str | None = None

    def step(self, step_id: str) -> StepDef:
        for s in self.steps:
            if s.id == step_id:
                return s
        raise KeyError(step_id)

    def flag(self, name: str) -> bool:
        return bool(self.flags.get(name, FLAG_DEFAULTS.get(name, False)))


def _tuple(value: Any) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        return (value,)
    return tuple(str(v) for v in value)


def _params(raw: Mapping[str, Any] | None) -> dict[str, TaggedParam]:
    out = {}
    for name, spec in (raw or {}).items():
        if isinstance(spec, Mapping):
            out[name] = TaggedParam(spec.get("value"), str(spec.get("tag", "invariant")))
        else:
            out[name] = TaggedParam(spec, "invariant")
    return out


def _step(raw: Mapping[str, Any], prefix: str = "") -> StepDef:
    if "skill" not in raw:
        raise InvalidValue("every step needs a skill")
    known = {"id", "skill", "kind", "consumes", "produces", "optional_consumes", "gate", "when", "objective", "uses_wiki", "options"}
    extra = set(raw) - known
    if extra:
        raise InvalidValue(f"step {raw.get('id', raw['skill'])!r}: unknown keys {sorted(extra)}")
    step_id = str(raw.get("id") or raw["skill"])
    return StepDef(
        id=f"{prefix}{step_id}",
        skill=str(raw["skill"]),
        kind=str(raw.get("kind", "skill")),
        consumes=_tuple(raw.get("consumes")),
        produces=_tuple(raw.get("produces")),
        optional_consumes=_tuple(raw.get("optional_consumes")),
        gate=raw.get("gate"),
        when=raw.get("when"),
        objective=str(raw.get("objective", "")),
        uses_wiki=bool(raw.get("uses_wiki", False)),
        options=dict(raw.get("options") or {}),
    )


def _read_source(name: str, project: Project | None) -> str:
    if project is not None:
        local = project.workflows_dir / f"{name}.yaml"
        if local.is_file():
            return local.read_text(encoding="utf-8")
    entry = asset("workflows").joinpath(f"{name}.yaml")
    if not entry.is_file():
        raise UnknownWorkflow(f"no workflow named {name!r}")
    return entry.read_text(encoding="utf-8")


def workflow_from_data(data: Mapping[str, Any], project: Project | None = None, _seen: tuple[str, ...] = ()) -> WorkflowDef:
    name = str(data.get("name", ""))
    if not name:
        raise InvalidValue("a workflow needs a name")
    if name in _seen:
        raise InvalidValue(f"workflow {name!r} composes itself")
    steps: list[StepDef] = []
    params: dict[str, TaggedParam] = {}
    inputs: list[str] = []
    optional: list[str] = []
    produced: set[str] = set()
    for part in data.get("compose") or []:
        part = {"workflow": part} if isinstance(part, str) else dict(part)
        sub = load_workflow(str(part["workflow"]), project, _seen + (name,))
        when = part.get("when")
        for s in sub.steps:
            steps.append(replace(s, id=f"{sub.name}.{s.id}", when=s.when or when))
        for k, v in sub.params.items():
            params.setdefault(k, v)
        inputs += [i for i in sub.inputs if i not in produced and i not in inputs]
        optional += [i for i in sub.optional_inputs if i not in produced and i not in optional]
        for s in sub.steps:
            produced.update(s.produces)
    steps += [_step(raw) for raw in data.get("steps") or []]
    params.update(_params(data.get("params")))
    inputs += [i for i in _tuple(data.get("inputs")) if i not in inputs]
    optional += [i for i in _tuple(data.get("optional_inputs")) if i not in optional]
    if not steps:
        raise InvalidValue(f"workflow {name!r} has no steps")
    ids = [s.id for s in steps]
    if len(set(ids)) != len(ids):
        raise InvalidValue(f"workflow {name!r} has duplicate step ids")
    flags = {str(k): bool(v) for k, v in (data.get("flags") or {}).items()}
    chain = data.get("chain")
    return WorkflowDef(
        name, tuple(steps), params, tuple(inputs), tuple(optional), flags, str(data.get("description", "")),
        str(chain) if chain else None,
    )


def with_chain(wf: WorkflowDef, project: Project | None = None) -> WorkflowDef:
    """``wf`` followed by its chained workflow, whose steps only run when ``auto_write`` is on."""
    if not wf.chain:
        return wf
    nxt = load_workflow(wf.chain, project)
    produced = {a for s in wf.steps for a in s.produces}
    steps = wf.steps + tuple(replace(s, id=f"{nxt.name}.{s.id}", when=s.when or "auto_write") for s in nxt.steps)
    params = dict(nxt.params)
    params.update(wf.params)
    optional = wf.optional_inputs + tuple(
        i for i in nxt.inputs + nxt.optional_inputs if i not in produced and i not in wf.inputs + wf.optional_inputs
    )
    return replace(wf, steps=steps, params=params, optional_inputs=optional, chain=None)


def load_workflow(name: str, project: Project | None = None, _seen: tuple[str, ...] = ()) -> WorkflowDef:
    data = yaml.safe_load(_read_source(name, project))
    if not isinstance(data, Mapping):
        raise InvalidValue(f"workflow file {name!r} is not a mapping")
    wf = workflow_from_data(data, project, _seen)
    if wf.name != name:
        raise InvalidValue(f"workflow file {name!r} declares name {wf.name!r}")
    return wf


def list_workflows(project: Project | None = None) -> list[str]:
    names = {p.name[: -len(".yaml")] for p in asset("workflows").iterdir() if p.name.endswith(".yaml")}
    if project is not None and project.workflows_dir.is_dir():
        names.update(p.stem for p in project.workflows_dir.glob("*.yaml"))
    return sorted(names)


def check_workflow(wf: WorkflowDef, registry: SkillRegistry, available: tuple[str, ...] | None = None) -> None:
    """Every skill resolves and every consumed artifact has a producer or an input."""
    missing = [s.skill for s in wf.steps if s.skill not in registry]
    if missing:
        raise DanglingSkillReference(f"workflow {wf.name!r} uses unknown skills: {', '.join(sorted(set(missing)))}")
    have = wf.inputs if available is None else available
    issues = validate_contracts(wf, have)
    if issues:
        raise ContractViolation(issues)


def skill_step_template(skill: str, project: Project | None = None) -> tuple[StepDef, dict[str, TaggedParam]]:
    """The first step that uses ``skill`` in any workflow, with that workflow's params.

    Skills no workflow uses get a plain prompt step reading ``INPUT``.
    """
    for name in list_workflows(project):
        try:
            wf = load_workflow(name, project)
        except (InvalidValue, UnknownWorkflow):
            continue
        for s in wf.steps:
            if s.skill == skill:
                return s, dict(wf.params)
    output = skill.upper().replace("-", "_") + "_OUTPUT"
    return StepDef(skill, skill, "skill", (), (output,), ("INPUT",)), {}


def single_step_workflow(skill: str, project: Project | None = None) -> WorkflowDef:
    """A one-step workflow so any skill can run on its own from the REPL."""
    step, params = skill_step_template(skill, project)
    step = replace(step, id=skill, when=None, gate=None if step.gate in SAFETY_GATES else step.gate)
    return WorkflowDef(
        name=f"skill:{skill}",
        steps=(step,),
        params=params,
        inputs=step.consumes,
        optional_inputs=step.optional_consumes,
    )


def workflow_path(project: Project, name: str) -> Path:
    return project.workflows_dir / f"{name}.yaml"


def workflow_to_dict(wf: WorkflowDef) -> dict[str, Any]:
    return {
        "name": wf.name,
        "description": wf.description,
        "inputs": list(wf.inputs),
        "optional_inputs": list(wf.optional_inputs),
        "flags": dict(wf.flags),
        "chain": wf.chain,
        "params": {k: {"value": p.value, "tag": p.tag} for k, p in wf.params.items()},
        "steps": [
            {
                "id": s.id,
                "skill": s.skill,
                "kind": s.kind,
                "consumes": list(s.consumes),
                "produces": list(s.produces),
                "optional_consumes": list(s.optional_consumes),
                "gate": s.gate,
                "when": s.when,
                "objective": s.objective,
                "uses_wiki": s.uses_wiki,
                "options": dict(s.options),
            }
            for s in wf.steps
        ],
    }


def workflow_from_dict(data: Mapping[str, Any]) -> WorkflowDef:
    """Inverse of ``workflow_to_dict``; step ids are kept as written."""
    return WorkflowDef(
        name=str(data["name"]),
        steps=tuple(_step(raw) for raw in data["steps"]),
        params=_params(data.get("params")),
        inputs=_tuple(data.get("inputs")),
        optional_inputs=_tuple(data.get("optional_inputs")),
        flags=dict(data.get("flags") or {}),
        description=str(data.get("description", "")),
        chain=data.get("chain"),
    )
