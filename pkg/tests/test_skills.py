import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aris import frontmatter
from aris.errors import (
    DanglingSkillReference,
    DuplicateSkill,
    MalformedFrontmatter,
    MissingField,
    MissingFrontmatter,
    SkillNotFound,
    UnknownReference,
)
from aris.orchestrator.workflows import check_workflow, list_workflows, load_workflow
from aris.skills import (
    SHARED_REFERENCES,
    SkillRegistry,
    SkillSpec,
    Tier,
    bundled_skills,
    list_skills,
    load_shared_reference,
    parse_skill,
    resolve_skill,
    serialize_skill,
)

FULL = """---
name: paper-claim-audit
description: Check numbers in the paper against raw results.
triggers:
  - audit the paper
  - check claims
allowed-tools: [Read, Grep]
category: Integrity
---
# Procedure

1. Read the draft.
"""


def spec(name, tier, body="b"):
    return SkillSpec(name=name, description="d", body=body, tier=Tier(tier))


def test_parse_populates_all_metadata():
    s = parse_skill(FULL, "bundled", "x/SKILL.md")
    assert s.name == "paper-claim-audit"
    assert s.description.startswith("Check numbers")
    assert s.triggers == ("audit the paper", "check claims")
    assert s.allowed_tools == ("Read", "Grep")
    assert s.category == "Integrity"
    assert s.body == "# Procedure\n\n1. Read the draft.\n"


def test_missing_fences():
    with pytest.raises(MissingFrontmatter):
        parse_skill("# just a body\n", "user", "a.md")


def test_description_only_is_missing_name():
    with pytest.raises(MissingField) as info:
        parse_skill("---\ndescription: x\n---\nbody\n", "user", "a.md")
    assert info.value.field == "name"


def test_nested_mapping_rejected():
    with pytest.raises(MalformedFrontmatter):
        parse_skill("---\nname: a\ndescription: b\nmeta:\n  k: v\n---\n", "user")


def test_unknown_keys_preserved_and_empty_lists_allowed():
    text = "---\nname: a\ndescription: b\ntriggers: []\nversion: 3\n---\nbody"
    s = parse_skill(text, "user")
    assert s.triggers == () and s.allowed_tools == ()
    assert dict(s.extra) == {"version": 3}
    assert s.category == "Uncategorized"
    assert "version: 3" in serialize_skill(s)


def test_resolution_tiers():
    reg = SkillRegistry([spec("a", "bundled"), spec("b", "bundled", "bundled"), spec("b", "user", "user")])
    assert resolve_skill("a", reg).tier is Tier.BUNDLED
    assert resolve_skill("b", reg).body == "user"
    with pytest.raises(SkillNotFound):
        resolve_skill("zzz", reg)


def test_project_tier_sits_between():
    reg = SkillRegistry([spec("s", "bundled"), spec("s", "project")])
    assert reg.resolve("s").tier is Tier.PROJECT


def test_duplicate_within_tier():
    with pytest.raises(DuplicateSkill):
        SkillRegistry([spec("a", "user"), spec("a", "user")])


def test_list_skills_filters():
    reg = SkillRegistry(bundled_skills())
    assert list_skills(SkillRegistry([])) == []
    integrity = {name for name, _, _ in list_skills(reg, "Integrity")}
    assert integrity == {"experiment-audit", "result-to-claim", "paper-claim-audit", "proof-checker"}
    assert {name for name, _, _ in list_skills(reg, "Memory")} == {"research-wiki"}


def test_shared_references():
    assert len(SHARED_REFERENCES) == 5
    assert load_shared_reference("reviewer-independence").content.strip()
    assert load_shared_reference("effort-contract").content.strip()
    with pytest.raises(UnknownReference):
        load_shared_reference("style-guide")


def test_bundled_workflows_resolve():
    reg = SkillRegistry(bundled_skills())
    for name in list_workflows():
        check_workflow(load_workflow(name), reg)


def test_dangling_skill_reference():
    reg = SkillRegistry([s for s in bundled_skills() if s.name != "novelty-check"])
    with pytest.raises(DanglingSkillReference):
        check_workflow(load_workflow("idea_discovery"), reg)


def test_discover_loads_user_dir(tmp_path):
    (tmp_path / "research-lit").mkdir()
    (tmp_path / "research-lit" / "SKILL.md").write_text("---\nname: research-lit\ndescription: mine\n---\nuser body\n")
    reg = SkillRegistry.discover(user_root=tmp_path)
    assert reg.resolve("research-lit").tier is Tier.USER
    assert reg.resolve("novelty-check").tier is Tier.BUNDLED


@st.composite
def tiered_specs(draw):
    names = draw(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=6, unique=True))
    out = []
    for name in names:
        for tier in draw(st.sets(st.sampled_from(["user", "project", "bundled"]), min_size=1)):
            out.append(spec(name, tier, f"{name}:{tier}"))
    return out


@given(tiered_specs(), st.randoms(use_true_random=False))
def test_resolution_ignores_discovery_order(specs, rnd):
    shuffled = list(specs)
    rnd.shuffle(shuffled)
    a, b = SkillRegistry(specs), SkillRegistry(shuffled)
    for name in a.names():
        assert a.resolve(name) == b.resolve(name)


safe_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs", "Cc"), blacklist_characters="\r\x85  "),
    max_size=30,
)
scalar = st.one_of(safe_text, st.integers(-1000, 1000), st.booleans())


@settings(max_examples=150)
@given(
    name=st.from_regex(r"[a-z][a-z0-9-]{0,20}", fullmatch=True),
    description=safe_text.filter(lambda s: s.strip() != ""),
    triggers=st.lists(safe_text, max_size=4),
    tools=st.lists(st.sampled_from(["Read", "Write", "Bash", "Grep"]), max_size=4),
    extra=st.dictionaries(st.from_regex(r"x_[a-z]{1,6}", fullmatch=True), scalar, max_size=3),
    body=st.text(max_size=200),
)
def test_parse_serialize_fixed_point(name, description, triggers, tools, extra, body):
    meta = {"name": name, "description": description, "triggers": triggers, "allowed-tools": tools, **extra}
    text = frontmatter.dump(meta, body)
    first = parse_skill(text, "user")
    assert first.body == body
    again = parse_skill(serialize_skill(first), "user")
    assert again == first
    assert serialize_skill(again) == serialize_skill(first)


def test_body_preserved_byte_for_byte():
    body = "line one  \r\n\ttabbed\n\n---\nnot a fence for us\n"
    text = "---\nname: a\ndescription: b\n---\n" + body
    assert parse_skill(text).body == body


def test_shuffled_file_order(tmp_path):
    names = [f"s{i}" for i in range(8)]
    for n in names:
        (tmp_path / f"{n}.md").write_text(f"---\nname: {n}\ndescription: d\n---\n{n}\n")
    reg1 = SkillRegistry.discover(user_root=tmp_path, include_bundled=False)
    specs = reg1.all_specs()
    random.Random(3).shuffle(specs)
    reg2 = SkillRegistry(specs)
    assert [reg1.resolve(n) for n in names] == [reg2.resolve(n) for n in names]
