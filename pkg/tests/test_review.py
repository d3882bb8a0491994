import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from aris.errors import PolicyUnsatisfiable, ScopeViolation, UnknownErrorClass
from aris.review import (
    ActionItem,
    ConvergencePolicy,
    Failure,
    RemediationPolicy,
    ReviewEngine,
    ReviewRequest,
    ReviewResult,
    Revision,
    RouteDirective,
    ThreadRegistry,
    auto_debug,
    check_convergence,
    check_family_separation,
    open_reviewer_thread,
    parse_review_reply,
    run_review_round,
)

from conftest import hub_with, review_block

SECRET = "EXECUTOR-ONLY-CONTENT-7731"


@pytest.fixture
def files(project):
    (project.root / "paper").mkdir(parents=True)
    (project.root / "paper" / "main.tex").write_text(f"\\section{{Intro}} {SECRET}\n")
    (project.root / "results.csv").write_text("acc\n0.85\n")
    return project


def request(paths, scope="document_only", policy="fresh", reviewer="rev"):
    return ReviewRequest("Review the manuscript.", tuple(paths), scope, policy, RouteDirective(reviewer, "claude", "gpt"))


def test_document_only_prompt_names_exactly_the_file(files):
    hub = hub_with(files, rev=[review_block(6.5)])
    run_review_round(request(["paper/main.tex"]), hub, files)
    msgs = hub.get("rev").transcript[0].messages
    user = msgs[-1].content
    assert "paper/main.tex" in user
    assert "results.csv" not in user
    assert all(SECRET not in m.content for m in msgs)


def test_document_only_rejects_results(files):
    hub = hub_with(files, rev=[review_block(6.5)])
    with pytest.raises(ScopeViolation):
        run_review_round(request(["results.csv"]), hub, files)
    assert hub.get("rev").transcript == []


def test_scripted_result_echo(files):
    reply = review_block(5.0, [("C1", "critical", "a"), ("C2", "critical", "b"), ("M1", "minor", "c")])
    result = run_review_round(request(["paper/main.tex"]), hub_with(files, rev=[reply]), files)
    assert result.score == 5.0
    assert [i.id for i in result.action_items if i.severity == "critical"] == ["C1", "C2"]


def test_parse_tolerates_prose_and_fallback():
    parsed = parse_review_reply("Lots of words.\n" + review_block(7.0) + "\nMore words.")
    assert parsed.score == 7.0
    assert parse_review_reply("Overall score: 6.5/10. Fine.").score == 6.5


def result(score, round_no, criticals_open):
    items = (ActionItem("X", "critical", "x", resolved=not criticals_open),)
    return ReviewResult(score, items, round=round_no)


def test_convergence_examples():
    p = ConvergencePolicy()
    assert check_convergence([result(7.5, 4, False)], p) == "accept"
    assert check_convergence([result(7.0, 2, True)], p) == "continue"
    assert check_convergence([result(5.0, 4, False)], p) == "stop_max_rounds"
    assert check_convergence([result(6.0, 2, False)], p) == "continue"


def expected_decision(score, round_no, open_critical, threshold=6.0, max_rounds=4):
    if score > threshold and not open_critical:
        return "accept"
    return "stop_max_rounds" if round_no >= max_rounds else "continue"


@pytest.mark.parametrize(
    "round_no,score,open_critical",
    list(itertools.product(range(1, 5), (5.9, 6.0, 6.1, 7.5), (False, True))),
)
def test_convergence_table(round_no, score, open_critical):
    assert check_convergence([result(score, round_no, open_critical)], ConvergencePolicy()) == expected_decision(
        score, round_no, open_critical
    )


@given(
    st.lists(st.tuples(st.floats(0, 10), st.booleans()), min_size=1, max_size=6),
    st.floats(0.5, 10),
    st.integers(1, 6),
)
def test_convergence_is_pure(history, threshold, max_rounds):
    results = [result(s, i + 1, o) for i, (s, o) in enumerate(history)]
    policy = ConvergencePolicy(threshold, max_rounds)
    assert check_convergence(results, policy) == check_convergence(list(results), policy)


def test_threads():
    reg = ThreadRegistry()
    first = reg.open("fresh")
    second = reg.open("fresh", first)
    assert second != first and reg.history(second) == []
    assert reg.open("cross_round", first) == first
    assert reg.open("cross_round", None) not in (first, second)
    assert open_reviewer_thread("fresh").startswith("thread-")


def test_family_separation():
    assert check_family_separation(RouteDirective("codex", "claude", "gpt")) == "ok"
    assert check_family_separation(RouteDirective("codex", "gpt", "gpt")) == "warn_same_family"
    assert check_family_separation(RouteDirective("codex", "GPT", "gpt")) == "warn_same_family"


@given(st.text(alphabet="abcdeGPTXÄ", max_size=6), st.text(alphabet="abcdeGPTXÄ", max_size=6))
def test_family_separation_normalization(a, b):
    expected = "warn_same_family" if a.lower() == b.lower() else "ok"
    assert check_family_separation(RouteDirective("r", a, b)) == expected


def test_fresh_loop_history_empty_and_calls_bounded(files):
    replies = [review_block(4.0, [("C1", "critical", "x")])] * 4
    hub = hub_with(files, rev=replies)
    engine = ReviewEngine(hub, files)
    state = engine.run_loop(request(["paper/main.tex"]), lambda s, r: Revision())
    transcript = hub.get("rev").transcript
    assert state.outcome == "stop_max_rounds" and len(transcript) == 4
    assert len({r.thread_id for r in state.history}) == 4
    for ex in transcript:
        assert [m.role for m in ex.messages] == ["system", "user"]
        assert all(SECRET not in m.content for m in ex.messages)
    # repeated ids from a fresh reviewer are new items
    assert [i.id for r in state.history for i in r.action_items] == ["C1", "R2-C1", "R3-C1", "R4-C1"]


def test_cross_round_keeps_thread(files):
    replies = [review_block(5.0, [("C1", "critical", "x")]), "ok\n```review\nscore: 7\nitems: []\nresolved: [C1]\n```"]
    hub = hub_with(files, rev=replies)
    state = ReviewEngine(hub, files).run_loop(
        request(["paper/main.tex"], policy="cross_round"), lambda s, r: Revision(resolved_ids=("C1",))
    )
    assert state.outcome == "accept"
    assert state.history[0].thread_id == state.history[1].thread_id
    assert len(hub.get("rev").transcript[1].messages) == 4


def test_loop_accepts_when_criticals_resolved(files):
    replies = [review_block(5.0, [("C1", "critical", "x")]), review_block(7.0)]
    state = ReviewEngine(hub_with(files, rev=replies), files).run_loop(
        request(["paper/main.tex"]), lambda s, r: Revision(resolved_ids=("C1",))
    )
    assert state.scores == [5.0, 7.0] and state.outcome == "accept" and state.resolved == ["C1"]


def test_auto_debug_remediated():
    out = auto_debug(Failure("oom", "CUDA OOM"), RemediationPolicy(), None, lambda s, n: True)
    assert out.kind == "remediated" and len(out.attempts) == 1


def test_auto_debug_rescued():
    hub = hub_with(rescue=["Diagnosis: the dataset path is wrong."])
    policy = RemediationPolicy(rescue_route="rescue")
    out = auto_debug(Failure("assertion_failure", "boom"), policy, hub, lambda s, n: False)
    assert out.kind == "rescued" and len(out.attempts) == 3
    assert len({a.strategy for a in out.attempts}) == 2
    assert out.diagnosis.startswith("Diagnosis")


def test_auto_debug_unresolved_without_rescue():
    out = auto_debug(Failure("timeout", "slow"), RemediationPolicy(), None, lambda s, n: False)
    assert out.kind == "unresolved"


def test_auto_debug_single_strategy_unsatisfiable():
    with pytest.raises(PolicyUnsatisfiable):
        auto_debug(Failure("solo", "x"), RemediationPolicy(), None, lambda s, n: False, {"solo": ("only",)})
    with pytest.raises(UnknownErrorClass):
        auto_debug(Failure("nope", "x"), RemediationPolicy(), None, lambda s, n: False)


def test_strategy_floor_by_enumeration():
    """Every class whose table has one strategy cannot satisfy the two-strategy floor."""
    from aris.review import DEFAULT_ERROR_CLASSES

    for cls, strategies in DEFAULT_ERROR_CLASSES.items():
        out = auto_debug(Failure(cls, "x"), RemediationPolicy(), None, lambda s, n: False)
        assert out.kind == "unresolved"
        assert len(set(strategies)) >= 2
