import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aris.config import ArisConfig, dumps, loads, mock_only_config
from aris.errors import (
    ContractViolation,
    DanglingSkillReference,
    GateDeclined,
    InvalidValue,
    PendingApproval,
    RunInterrupted,
    SafetyGateFailed,
)
from aris.orchestrator.directives import Directive, extract_directives, parse_directives
from aris.orchestrator.effort import TaggedParam, apply_effort, effort_preset, scale
from aris.orchestrator.rebuttal import (
    PHASES,
    RebuttalState,
    parse_reviews,
    phases_completed,
    rebuttal_gates,
)
from aris.orchestrator.runner import RunOptions, WorkflowRunner, load_summary
from aris.orchestrator.workflows import (
    WORKFLOW_NAMES,
    StepDef,
    WorkflowDef,
    check_workflow,
    list_workflows,
    load_workflow,
    with_chain,
    workflow_from_dict,
    workflow_to_dict,
)
from aris.skills import SkillRegistry
from aris.store import ArtifactStore

from conftest import W2_EXECUTOR_RULES, W2_REVIEWER_RULES, W2_SCORES, scripted_hub, w2_inputs

# -- directives ------------------------------------------------------------


def test_effort_directive():
    assert parse_directives("effort: max") == [Directive("effort", "max")]


def test_reviewer_directive_and_remainder():
    parsed = extract_directives("/auto-review-loop log.md reviewer: oracle-pro effort: lite")
    assert parsed.as_dict() == {"reviewer": "oracle-pro", "effort": "lite"}
    assert parsed.remainder == "/auto-review-loop log.md"


def test_invalid_effort_rejected():
    with pytest.raises(InvalidValue):
        parse_directives("effort: turbo")


def test_unknown_keys_left_in_place():
    parsed = extract_directives("note: hello effort: max")
    assert parsed.unknown == ["note"]
    assert "note: hello" in parsed.remainder


def test_boolean_directives():
    parsed = extract_directives("human checkpoint: true auto_write: off")
    assert parsed.as_dict() == {"human_checkpoint": True, "auto_write": False}


# -- effort ----------------------------------------------------------------


def test_lite_breadth_example():
    assert apply_effort("lite", {"papers": TaggedParam(20, "breadth")})["papers"] == 8


def test_max_iteration_example():
    assert apply_effort("max", {"rounds": TaggedParam(4, "iteration")})["rounds"] == 10


@pytest.mark.parametrize("name", ["lite", "balanced", "max", "beast"])
def test_reviewer_reasoning_fixed(name):
    assert apply_effort(name, {})["reviewer_reasoning"] == "xhigh"


def test_beast_bounds():
    assert effort_preset("beast").breadth_mult == 5
    assert effort_preset("beast", 8.0).iter_mult == 8
    with pytest.raises(InvalidValue):
        effort_preset("beast", 8.5)


_TAGGED = st.dictionaries(
    st.text("abcdef", min_size=1, max_size=4),
    st.one_of(
        st.builds(TaggedParam, st.integers(1, 10_000), st.sampled_from(["breadth", "depth", "iteration"])),
        st.builds(TaggedParam, st.one_of(st.integers(), st.floats(allow_nan=False), st.text(max_size=5)), st.just("invariant")),
    ),
    max_size=8,
)


@settings(max_examples=300)
@given(params=_TAGGED, name=st.sampled_from(["lite", "balanced", "max", "beast"]))
def test_effort_scaling_property(params, name):
    out = apply_effort(name, params)
    mult = {"lite": 0.4, "balanced": 1, "max": 2.5, "beast": 5}[name]
    for key, param in params.items():
        if param.tag == "invariant":
            assert out[key] is param.value
        else:
            # integer oracle: ceil(v * m) with m = p/q computed as -(-(v*p) // q)
            p, q = {0.4: (2, 5), 1: (1, 1), 2.5: (5, 2), 5: (5, 1)}[mult]
            assert out[key] == max(1, -(-(param.value * p) // q))
    assert out["reviewer_reasoning"] == "xhigh"


def test_scale_never_below_one():
    assert scale(1, effort_preset("lite").breadth_mult) == 1


# -- workflows and config --------------------------------------------------


def test_bundled_workflows_load_and_check():
    registry = SkillRegistry.discover()
    assert set(WORKFLOW_NAMES) <= set(list_workflows())
    for name in WORKFLOW_NAMES:
        wf = load_workflow(name)
        check_workflow(wf, registry, tuple(wf.inputs) + tuple(wf.optional_inputs))


def test_research_pipeline_composes_paper_writing():
    wf = load_workflow("research_pipeline")
    skills = [s.skill for s in wf.steps]
    assert skills.index("experiment-audit") < skills.index("result-to-claim") < skills.index("paper-write")


def test_chain_appends_paper_writing():
    wf = with_chain(load_workflow("auto_review_loop"))
    assert wf.steps[-1].skill == "auto-paper-improvement-loop"


def test_workflow_dict_round_trip():
    for name in WORKFLOW_NAMES:
        wf = load_workflow(name)
        assert workflow_from_dict(json.loads(json.dumps(workflow_to_dict(wf)))) == wf


def test_dangling_skill_rejected():
    wf = WorkflowDef("bad", steps=(StepDef("s", "no-such-skill"),))
    with pytest.raises(DanglingSkillReference):
        check_workflow(wf, SkillRegistry.discover())


def test_config_round_trip_without_secrets():
    for config in (ArisConfig(), mock_only_config()):
        text = dumps(config)
        assert loads(text) == config
        assert "sk-" not in text
        assert "api_key =" not in text


# -- rebuttal gates --------------------------------------------------------

REVIEWS = "Reviewer 1:\n- Please add an ablation.\n- The notation is unclear.\n"


def _state(**kw) -> RebuttalState:
    points = parse_reviews(REVIEWS)
    base = dict(
        points=points,
        paper="Accuracy reaches 91.3 on the test set.",
        reviews=REVIEWS,
        draft="[R1.1] We add an ablation; accuracy stays at 91.3.\n[R1.2] We fixed the notation.",
        polished="[R1.1] Thank you, we add an ablation.\n[R1.2] Thank you, we fixed the notation.",
        rebuttal="[R1.1] Thank you, we add an ablation.\n[R1.2] Thank you, we fixed the notation.",
    )
    base.update(kw)
    return RebuttalState(**base)


def test_all_gates_pass_all_phases_run():
    decisions = rebuttal_gates(_state())
    assert [d.status for d in decisions] == ["pass"] * 3
    assert phases_completed(decisions) == len(PHASES) == 7


def test_second_gate_failure_skips_later_phases():
    decisions = rebuttal_gates(_state(polished="Obviously the reviewer misunderstood."))
    assert [d.status for d in decisions] == ["pass", "fail", "skipped"]
    assert phases_completed(decisions) == 5


def test_unsupported_number_fails_claims_check():
    decisions = rebuttal_gates(_state(draft="[R1.1] Accuracy improves to 97.2."))
    assert decisions[0].status == "fail" and "97.2" in decisions[0].reason
    assert phases_completed(decisions) == 4


def test_empty_reviews_fail_before_any_gate():
    with pytest.raises(ValueError):
        parse_reviews("   \n")


# -- runner ----------------------------------------------------------------


def _runner(project, hub=None, **kw) -> WorkflowRunner:
    config = mock_only_config()
    return WorkflowRunner(project, config, hub=hub or config.hub(project), **kw)


def test_w2_scripted_scores_accept_at_round_four(project, tmp_path):
    config = mock_only_config()
    hub = scripted_hub(project, config, W2_EXECUTOR_RULES, W2_REVIEWER_RULES)
    summary = WorkflowRunner(project, config, hub=hub).run(
        "auto_review_loop", w2_inputs(tmp_path / "in"), RunOptions(run_id="w2")
    )
    assert summary.status == "completed"
    assert summary.review == {"step": "review", "rounds": 4, "scores": W2_SCORES, "outcome": "accept"}
    assert load_summary(project, "w2").review == summary.review


def _narrative(tmp_path):
    path = tmp_path / "narrative.md"
    path.write_text("# Narrative\n\nOur method reaches 91.3 accuracy against 88.1 for the baseline.\n")
    return {"NARRATIVE_REPORT": path}


W3_ORDER = ["PAPER_PLAN", "FIGURES", "PAPER_DRAFT", "PROOF_OBLIGATIONS", "PAPER_CLAIM_AUDIT", "COMPILED_PAPER", "IMPROVEMENT_REPORT"]


def test_w3_produces_artifacts_in_order(project, tmp_path):
    summary = _runner(project).run("paper_writing", _narrative(tmp_path), RunOptions(run_id="w3"))
    assert summary.status == "completed"
    assert all(s.status == "done" for s in summary.steps)
    store = ArtifactStore(project)
    created = sorted((store.history(n)[0].created_at, W3_ORDER.index(n)) for n in W3_ORDER)
    assert [i for _, i in created] == sorted(i for _, i in created)
    assert store.path_of("FIGURES").suffix == ".svg"


def _digests(project, names):
    store = ArtifactStore(project)
    return {n: store.record(n).content_hash for n in names}


def test_w3_deterministic(tmp_path):
    from aris.store import Project

    hashes = []
    for k in range(2):
        project = Project(tmp_path / f"p{k}")
        _runner(project).run("paper_writing", _narrative(tmp_path), RunOptions(run_id="w3"))
        hashes.append(_digests(project, W3_ORDER))
    assert hashes[0] == hashes[1]


def test_resume_after_kill_at_every_boundary(tmp_path):
    from aris.store import Project

    reference = Project(tmp_path / "ref")
    _runner(reference).run("paper_writing", _narrative(tmp_path), RunOptions(run_id="w3"))
    expected = _digests(reference, W3_ORDER)
    for boundary in range(len(W3_ORDER) - 1):
        project = Project(tmp_path / f"kill{boundary}")
        with pytest.raises(RunInterrupted):
            _runner(project, halt_after_step=lambda i, b=boundary: i == b).run(
                "paper_writing", _narrative(tmp_path), RunOptions(run_id="w3")
            )
        summary = _runner(project).resume("w3")
        assert summary.status == "completed" and summary.resumes == 1
        assert [s.index for s in summary.steps] == list(range(len(W3_ORDER)))
        assert _digests(project, W3_ORDER) == expected, boundary


def test_resume_mid_review_loop(project, tmp_path):
    config = mock_only_config()
    inputs = w2_inputs(tmp_path / "in")
    hub = scripted_hub(project, config, W2_EXECUTOR_RULES, W2_REVIEWER_RULES)
    with pytest.raises(RunInterrupted):
        WorkflowRunner(project, config, hub=hub, halt_after_step=lambda i: i == 1).run(
            "auto_review_loop", inputs, RunOptions(run_id="w2")
        )
    hub = scripted_hub(project, config, W2_EXECUTOR_RULES, W2_REVIEWER_RULES)
    summary = WorkflowRunner(project, config, hub=hub).resume("w2")
    assert summary.review["scores"] == W2_SCORES


def test_declined_gate_runs_nothing_after(project, tmp_path):
    runner = _runner(project, approver=lambda kind, payload: "declined")
    with pytest.raises(GateDeclined) as info:
        runner.run("paper_writing", _narrative(tmp_path), RunOptions(run_id="g", human_checkpoint=True))
    summary = info.value.summary
    assert summary.status == "gate_declined"
    assert [s.status for s in summary.steps] == ["skipped_by_gate"] * len(W3_ORDER)
    assert not ArtifactStore(project).exists("PAPER_PLAN")


def test_no_approver_leaves_run_pending(project, tmp_path):
    with pytest.raises(PendingApproval) as info:
        _runner(project).run("paper_writing", _narrative(tmp_path), RunOptions(run_id="p", human_checkpoint=True))
    assert info.value.summary.status == "pending_approval"


def test_every_step_accounted_for(project, tmp_path):
    approvals = iter(["approved", "approved", "declined"])
    runner = _runner(project, approver=lambda kind, payload: next(approvals))
    with pytest.raises(GateDeclined) as info:
        runner.run("paper_writing", _narrative(tmp_path), RunOptions(run_id="a", human_checkpoint=True))
    statuses = [s.status for s in info.value.summary.steps]
    assert statuses == ["done", "done"] + ["skipped_by_gate"] * (len(W3_ORDER) - 2)
    assert len(info.value.summary.approvals) == 3


def test_missing_required_input_is_a_contract_violation(project):
    with pytest.raises(ContractViolation):
        _runner(project).run("paper_writing", {}, RunOptions(run_id="c"))


def test_failed_audit_does_not_abort(project, tmp_path):
    finding = (
        "```findings\n- {category: phantom_results, severity: fail, evidence: numbers appear nowhere in the logs,"
        " files: []}\n```\n"
    )
    config = mock_only_config()
    hub = scripted_hub(project, config, reviewer_rules=[{"match": "Objective: audit these evaluation files", "reply": finding}])
    brief = tmp_path / "idea.md"
    brief.write_text("# Idea\n\nSparse attention for long documents.\n")
    plan = tmp_path / "plan.md"
    plan.write_text("# Plan\n\nTrain three seeds.\n")
    summary = WorkflowRunner(project, config, hub=hub).run(
        "experiment_bridge", {"IDEA_REPORT": brief, "EXPERIMENT_PLAN": plan}, RunOptions(run_id="ea")
    )
    assert summary.status == "completed"
    assert summary.steps[-1].detail["integrity_status"] == "fail"


def test_safety_gate_failure_in_rebuttal(project, tmp_path):
    config = mock_only_config()
    rude = "```artifact REBUTTAL_POLISHED\n[R1.1] Obviously this is trivially true.\n[R1.2] Fixed.\n```\n"
    hub = scripted_hub(project, config, executor_rules=[{"match": r"Skill: rebuttal\b.*Task: tone_polish", "reply": rude}])
    draft = tmp_path / "draft.tex"
    draft.write_text("Accuracy reaches 91.3.\n")
    with pytest.raises(SafetyGateFailed) as info:
        WorkflowRunner(project, config, hub=hub).run(
            "rebuttal", {"PAPER_DRAFT": draft, "REVIEWS": REVIEWS}, RunOptions(run_id="rb")
        )
    summary = info.value.summary
    assert info.value.gate == "tone-check"
    assert summary.status == "gate_failed"
    assert [s.status for s in summary.steps].count("done") == 5


class _Killed(BaseException):
    """Stands in for the process dying; not an error the runner may handle."""


class _KillAfterRound(WorkflowRunner):
    def __init__(self, *args, rounds: int, **kw):
        super().__init__(*args, **kw)
        self.rounds = rounds

    def _checkpoint(self, run, step_index):
        super()._checkpoint(run, step_index)
        if run.loop and len(run.loop["state"]["history"]) == self.rounds:
            raise _Killed


@pytest.mark.parametrize("rounds", [1, 2, 3])
def test_kill_inside_review_loop_resumes_with_new_threads(project, tmp_path, rounds):
    import re

    config = mock_only_config()
    inputs = w2_inputs(tmp_path / "in")
    hub = scripted_hub(project, config, W2_EXECUTOR_RULES, W2_REVIEWER_RULES)
    with pytest.raises(_Killed):
        _KillAfterRound(project, config, hub=hub, rounds=rounds).run("auto_review_loop", inputs, RunOptions(run_id="k"))
    hub = scripted_hub(project, config, W2_EXECUTOR_RULES, W2_REVIEWER_RULES)
    summary = WorkflowRunner(project, config, hub=hub).resume("k")
    assert summary.review == {"step": "review", "rounds": 4, "scores": W2_SCORES, "outcome": "accept"}
    log = ArtifactStore(project).get_text("AUTO_REVIEW")
    threads = re.findall(r"\| (thread-\d+) \|$", log, re.M)
    assert len(threads) == 4 and len(set(threads)) == 4
