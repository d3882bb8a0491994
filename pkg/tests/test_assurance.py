import itertools
import json
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aris.assurance.citations import CitationCandidate, audit_citations, candidates_from_sources, recommend
from aris.assurance.claims import ClaimCandidate, ClaimRecord, map_result_to_claim, propagate_integrity, reviewer_judge
from aris.assurance.editing import run_editing_passes
from aris.assurance.integrity import CATEGORIES, IntegrityFinding, IntegrityReport, run_experiment_audit, status_of
from aris.assurance.numbers import numeric_compare
from aris.assurance.paper_audit import audit_paper_claims
from aris.assurance.proofs import build_proof_ledger
from aris.errors import UnknownCategory
from aris.wiki import ResearchWiki

from conftest import hub_with


def findings_reply(items):
    body = "\n".join(f"  - category: {c}\n    severity: {s}\n    evidence: e" for c, s in items)
    return "Audit.\n```findings\n" + (body if items else "[]") + "\n```\n"


@pytest.fixture
def evalfiles(project):
    (project.root / "eval.py").parent.mkdir(parents=True, exist_ok=True)
    (project.root / "eval.py").write_text("print(1)\n")
    return project


@pytest.mark.parametrize(
    "items,status",
    [([("phantom_results", "fail")], "fail"), ([], "pass"), ([("scope_inflation", "warn")] * 2, "warn")],
)
def test_experiment_audit_status(evalfiles, items, status):
    hub = hub_with(evalfiles, rev=[findings_reply(items)])
    report = run_experiment_audit(["eval.py"], hub, "rev", evalfiles)
    assert report.integrity_status == status
    assert "eval.py" in hub.get("rev").transcript[0].messages[-1].content


@given(st.lists(st.tuples(st.sampled_from(CATEGORIES), st.sampled_from(["pass", "warn", "fail"])), max_size=8))
def test_status_is_max_severity(items):
    order = ["pass", "warn", "fail"]
    expected = max((s for _, s in items), key=order.index, default="pass")
    assert status_of(IntegrityFinding(c, s) for c, s in items) == expected


def verdict_reply(pairs):
    return "```verdicts\n" + "\n".join(f"- claim: {c}\n  verdict: {v}" for c, v in pairs) + "\n```"


CLAIM = [ClaimCandidate("C1", "Our method beats the baseline.", (("EXPERIMENT_RESULTS", "accuracy"),))]
EVIDENCE = {"EXPERIMENT_RESULTS": "results.json"}


def test_claim_supported_with_clean_integrity():
    judge = reviewer_judge(hub_with(rev=[verdict_reply([("C1", "supported")])]), "rev")
    ledger = map_result_to_claim(CLAIM, EVIDENCE, judge, IntegrityReport([]))
    assert ledger.get("C1").verdict == "supported" and not ledger.get("C1").requires_integrity_fix


def test_claim_capped_when_integrity_fails(project):
    judge = reviewer_judge(hub_with(rev=[verdict_reply([("C1", "supported")])]), "rev")
    report = IntegrityReport([IntegrityFinding("phantom_results", "fail")])
    wiki = ResearchWiki(project)
    ledger = map_result_to_claim(CLAIM, EVIDENCE, judge, report, wiki)
    rec = ledger.get("C1")
    assert rec.verdict == "partially_supported" and rec.requires_integrity_fix
    assert wiki.get(rec.wiki_node).status == "partially_supported"


def test_contradicted_claim_invalidated():
    judge = reviewer_judge(hub_with(rev=[verdict_reply([("C1", "invalidated")])]), "rev")
    assert map_result_to_claim(CLAIM, EVIDENCE, judge).get("C1").verdict == "invalidated"


@given(
    st.lists(
        st.tuples(st.sampled_from(["supported", "partially_supported", "invalidated"]), st.sampled_from([None, "pass", "warn", "fail"])),
        max_size=20,
    )
)
def test_fail_never_supported(rows):
    for verdict, status in rows:
        capped, _ = propagate_integrity(verdict, status)
        rec = ClaimRecord("C", "s", (), capped, status)
        if status == "fail":
            assert rec.verdict != "supported"


def test_supported_record_with_failed_integrity_is_unrepresentable():
    with pytest.raises(ValueError):
        ClaimRecord("C", "s", (), "supported", "fail")


@pytest.mark.parametrize(
    "raw,status",
    [({"accuracy": 0.85}, "exact_match"), ({"accuracy": 0.8493}, "rounding_ok"), ({"runtime": 3}, "missing_evidence")],
)
def test_paper_claim_audit(raw, status):
    text = "Our method reaches an accuracy of 0.85 on the test split."
    entries = audit_paper_claims(text, None, {"results.json": json.dumps(raw)})
    assert [e.status for e in entries] == [status]


def test_paper_claim_audit_reviewer_config_flag():
    reply = "```audit\n- claim: N001\n  status: config_mismatch\n  note: different seed count\n```"
    entries = audit_paper_claims(
        "Our method reaches an accuracy of 0.85.", None, {"r.json": '{"accuracy": 0.85}'}, hub_with(rev=[reply]), "rev"
    )
    assert entries[0].status == "config_mismatch"


def test_numeric_compare_examples():
    assert numeric_compare("7.5", 1, 7.5) == "exact_match"
    assert numeric_compare("0.85", 2, 0.8449) == "number_mismatch"
    assert numeric_compare("2.5", 1, 2.5000001) == "rounding_ok"
    assert numeric_compare("0.85", 2, 0.8493) == "rounding_ok"


def oracle_round(value: str, precision: int) -> str:
    """Half-even rounding done with exact integer arithmetic on the decimal string."""
    frac = Fraction(value) * 10**precision
    floor = frac.numerator // frac.denominator
    rem = frac - floor
    if rem > Fraction(1, 2) or (rem == Fraction(1, 2) and floor % 2 == 1):
        floor += 1
    sign = "-" if floor < 0 else ""
    digits = str(abs(floor)).rjust(precision + 1, "0")
    return sign + (digits[:-precision] + "." + digits[-precision:] if precision else digits)


def oracle_compare(display: str, precision: int, evidence: str) -> str:
    if Fraction(display) == Fraction(evidence):
        return "exact_match"
    if Fraction(oracle_round(evidence, precision)) == Fraction(display):
        return "rounding_ok"
    return "number_mismatch"


decimal_strings = st.builds(
    lambda sign, whole, frac: f"{sign}{whole}" + (f".{frac}" if frac else ""),
    st.sampled_from(["", "-"]),
    st.integers(0, 999),
    st.from_regex(r"[0-9]{0,6}", fullmatch=True),
)


@settings(max_examples=10_000, deadline=None)
@given(decimal_strings, st.integers(0, 4), st.integers(-50, 50))
def test_numeric_compare_matches_oracle(evidence, precision, nudge):
    display = oracle_round(evidence, precision)
    if nudge % 3 == 0:
        display = str(Decimal(display) + Decimal(nudge).scaleb(-precision))
        display = oracle_round(display, precision)
    assert numeric_compare(display, precision, evidence) == oracle_compare(display, precision, evidence)


@given(decimal_strings, decimal_strings, st.integers(0, 4))
def test_rounding_ok_depends_only_on_rounded_evidence(a, b, precision):
    if oracle_round(a, precision) != oracle_round(b, precision):
        return
    display = oracle_round(a, precision)
    sa, sb = numeric_compare(display, precision, a), numeric_compare(display, precision, b)
    assert (sa == "number_mismatch") == (sb == "number_mismatch")


def test_editing_terminology_flag():
    draft = "# Methods\nWe tune on the validation split.\n\n# Results\nOn the dev set we see gains.\n"
    _, report = run_editing_passes(draft)
    assert [p.number for p in report.passes] == [1, 2, 3, 4, 5]
    assert len(report.passes[3].flags) == 1


def test_editing_zero_numbers():
    _, report = run_editing_passes("No numbers here at all.\n", raw_files={"r.json": '{"accuracy": 0.9}'})
    assert report.passes[4].checks == 0


def test_editing_identity_transform():
    draft = "A sentence.\nAnother one.\n"

    hub = hub_with(ed={"rules": [{"match": ".", "reply": "```draft\n" + draft + "```"}]})
    revised, report = run_editing_passes(draft, hub, "ed")
    assert revised == draft
    assert [p.changes for p in report.passes[:3]] == [0, 0, 0]


def test_proof_ledger():
    assert build_proof_ledger("No theorems in this text.", None, None).obligations == []
    theory = "\\begin{lemma}\\label{lem:a} x > 0 \\end{lemma}\\begin{proof} trivially \\end{proof}"
    reply = "```proof\nstatus: unjustified\nimpact: local\ncategory: 3\n```"
    ledger = build_proof_ledger(theory, hub_with(rev=[reply]), "rev")
    [ob] = ledger.obligations
    assert (ob.target, ob.proof_status, ob.impact) == ("lem:a", "unjustified", "local")
    with pytest.raises(UnknownCategory):
        build_proof_ledger(theory, hub_with(rev=["```proof\nstatus: valid\ncategory: 21\n```"]), "rev")


def axis_reply(verdict, replaceable=False):
    return f"```citation\nverdict: {verdict}\nreplaceable: {str(replaceable).lower()}\n```"


CAND = CitationCandidate("smith20", {"title": "A paper", "author": "Smith", "year": "2020"}, ("as shown by Smith",))


def test_citations_keep():
    [e] = audit_citations([CAND], hub_with(rev=[axis_reply("pass")] * 3), "rev")
    assert e.recommendation == "KEEP"


def test_citations_existence_fail():
    for replaceable in (False, True):
        [e] = audit_citations([CAND], hub_with(rev=[axis_reply("fail", replaceable), axis_reply("pass"), axis_reply("pass")]), "rev")
        assert e.recommendation in ("REMOVE", "REPLACE")


def test_citations_context_fail():
    [e] = audit_citations([CAND], hub_with(rev=[axis_reply("pass"), axis_reply("pass"), axis_reply("fail")]), "rev")
    assert e.recommendation in ("FIX", "REPLACE")


def test_citation_not_in_bib_is_removed():
    cands = candidates_from_sources("@article{a, title={T}}", "We cite \\cite{a,b}.")
    entries = audit_citations(cands, hub_with(rev=[axis_reply("pass")] * 3), "rev")
    assert {e.cite_key: e.recommendation for e in entries} == {"a": "KEEP", "b": "REMOVE"}


RECOMMENDATION_TABLE = {
    ("pass", "pass", "pass"): "KEEP",
    ("pass", "pass", "fail"): "FIX",
    ("pass", "fail", "pass"): "FIX",
    ("pass", "fail", "fail"): "FIX",
    ("fail", "pass", "pass"): ("REMOVE", "REPLACE"),
    ("fail", "pass", "fail"): ("REMOVE", "REPLACE"),
    ("fail", "fail", "pass"): ("REMOVE", "REPLACE"),
    ("fail", "fail", "fail"): ("REMOVE", "REPLACE"),
}


@pytest.mark.parametrize("axes", list(itertools.product(["pass", "fail"], repeat=3)))
def test_recommendation_table(axes):
    expected = RECOMMENDATION_TABLE[axes]
    if isinstance(expected, tuple):
        assert recommend(*axes, replaceable=False) == "REMOVE"
        assert recommend(*axes, replaceable=True) == "REPLACE"
    else:
        assert recommend(*axes, replaceable=False) == recommend(*axes, replaceable=True) == expected


SEEDS = {"seeds/0.json": '{"accuracy": 91.4}', "seeds/1.json": '{"accuracy": 89.0}', "seeds/2.json": '{"accuracy": 88.6}'}


def test_best_seed_reported_as_headline_is_flagged():
    text = "Our method reaches an accuracy of 91.4 on the test split."
    [entry] = audit_paper_claims(text, None, {"results.json": '{"accuracy": 91.4}', **SEEDS})
    assert entry.status == "config_mismatch"
    assert entry.note == "matches the best of 3 seeds (91.4); the seed mean is 89.667"


def test_seed_mean_stands_in_for_missing_aggregate():
    text = "Our method reaches an accuracy of 89.67 on the test split."
    [entry] = audit_paper_claims(text, None, SEEDS)
    assert entry.status == "rounding_ok" and entry.note == ""


def test_seed_files_do_not_override_aggregate_values():
    text = "Our method reaches an accuracy of 89.7 on the test split."
    [entry] = audit_paper_claims(text, None, {"results.json": '{"accuracy": 89.7}', **SEEDS})
    assert entry.status == "exact_match" and entry.evidence_value == "89.7"
