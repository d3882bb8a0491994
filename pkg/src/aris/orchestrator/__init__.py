"""Workflow definitions, directives, effort presets and the step runner."""

from .directives import DIRECTIVE_KEYS, Directive, DirectiveParse, extract_directives, parse_directives, validate_directive
from .effort import PRESETS, EffortPreset, TaggedParam, apply_effort, effort_preset
from .experiments import CommandResult, FixtureRunner, SubprocessRunner, classify_error
from .rebuttal import GateDecision, RebuttalState, evaluate_gate, parse_reviews, rebuttal_gates
from .runner import (
    RunOptions,
    RunSummary,
    StepRecord,
    WorkflowRunner,
    load_summary,
    run_workflow,
    summary_path,
)
from .workflows import (
    WORKFLOW_NAMES,
    StepDef,
    WorkflowDef,
    check_workflow,
    list_workflows,
    load_workflow,
    single_step_workflow,
    with_chain,
)

__all__ = [
    "DIRECTIVE_KEYS",
    "PRESETS",
    "WORKFLOW_NAMES",
    "CommandResult",
    "Directive",
    "DirectiveParse",
    "EffortPreset",
    "FixtureRunner",
    "GateDecision",
    "RebuttalState",
    "RunOptions",
    "RunSummary",
    "StepDef",
    "StepRecord",
    "SubprocessRunner",
    "TaggedParam",
    "WorkflowDef",
    "WorkflowRunner",
    "apply_effort",
    "check_workflow",
    "classify_error",
    "effort_preset",
    "evaluate_gate",
    "extract_directives",
    "list_workflows",
    "load_summary",
    "load_workflow",
    "parse_directives",
    "parse_reviews",
    "rebuttal_gates",
    "run_workflow",
    "single_step_workflow",
    "summary_path",
    "validate_directive",
    "with_chain",
]
