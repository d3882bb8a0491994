import json
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aris.errors import NotAClaim, UnknownEndpoint, UnknownRelation
from aris.wiki import (
    QUERY_PACK_CAP,
    RELATIONS,
    ResearchWiki,
    WikiEdge,
    WikiNode,
    banlist,
    build_query_pack,
    render_query_pack,
)

ID_RE = re.compile(r"^(paper|idea|experiment|claim)/[a-z0-9-]+-[0-9a-f]{6}$")


def test_add_node_and_edge(project):
    w = ResearchWiki(project)
    idea = w.add_node(WikiNode("idea", "Sparse attention for long context"))
    exp = w.add_node(WikiNode("experiment", "Ablate sparsity"))
    assert ID_RE.match(idea) and ID_RE.match(exp)
    w.add_edge(WikiEdge(idea, exp, "tested_by"))
    with pytest.raises(UnknownRelation):
        w.add_edge(WikiEdge(idea, exp, "refines"))
    with pytest.raises(UnknownEndpoint):
        w.add_edge(WikiEdge(idea, "idea/missing-000000", "extends"))


def test_ids_unique_and_not_reused(project):
    w = ResearchWiki(project)
    a = w.add_node(WikiNode("idea", "Same title"))
    w.tombstone(a)
    b = w.add_node(WikiNode("idea", "Same title"))
    assert a != b
    assert a in w.nodes and w.nodes[a].tombstoned


def test_empty_pack(project):
    pack = build_query_pack(ResearchWiki(project))
    assert pack.char_count < 200
    assert all(v == [] for v in pack.sections.values()) and len(pack.sections) == 4


def test_rejected_ideas_listed(project):
    w = ResearchWiki(project)
    ids = [w.add_node(WikiNode("idea", f"Idea {i}", status="rejected")) for i in range(3)]
    pack = build_query_pack(w)
    for node_id in ids:
        assert node_id in "".join(pack.sections["rejected_ideas"])


def oracle_pack_length(entries, cap):
    """Render every prefix and keep the longest that fits."""
    best = 0
    for k in range(len(entries) + 1):
        if len(render_query_pack(entries[:k], omitted=len(entries) - k)) <= cap:
            best = k
    return best


def test_large_wiki_truncated_by_whole_entries():
    w = ResearchWiki("/nonexistent", persist=False)
    n = 0
    while len(render_query_pack(w.query_pack_entries())) < 12000:
        w.add_node(WikiNode("experiment", f"Experiment number {n} " + "x" * 60, status="done"))
        n += 1
    entries = w.query_pack_entries()
    assert len(render_query_pack(entries)) >= 12000
    pack = w.build_query_pack()
    assert pack.char_count <= QUERY_PACK_CAP
    keep = oracle_pack_length(entries, QUERY_PACK_CAP)
    assert pack.text == render_query_pack(entries[:keep], omitted=len(entries) - keep)
    assert pack.omitted == len(entries) - keep > 0


def test_banlist(project):
    w = ResearchWiki(project)
    assert banlist(w) == set()
    a = w.add_node(WikiNode("idea", "A", status="rejected"))
    assert banlist(w) == {a}
    b = w.add_node(WikiNode("idea", "B", status="active"))
    c = w.add_node(WikiNode("claim", "C"))
    w.add_edge(WikiEdge(c, b, "invalidates"))
    assert banlist(w) == {a, b}
    assert ResearchWiki(project).banlist() == {a, b}


def test_claim_status_updates(project):
    w = ResearchWiki(project)
    c = w.add_node(WikiNode("claim", "Method beats baseline"))
    assert w.update_claim_status(c, "supported").status == "supported"
    idea = w.add_node(WikiNode("idea", "I"))
    with pytest.raises(NotAClaim):
        w.update_claim_status(idea, "supported")
    w.update_claim_status(c, "invalidated")
    w.update_claim_status(c, "supported")
    hist = ResearchWiki(project).history(c)
    assert len(hist) == 3
    assert hist[1].endswith("supported -> invalidated") and hist[2].endswith("invalidated -> supported")


def replay_statuses(start, verdicts):
    out, cur = [], start
    for v in verdicts:
        out.append((cur, v))
        cur = v
    return out


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from(["supported", "partially_supported", "invalidated"]), max_size=8))
def test_history_replay(tmp_path_factory, verdicts):
    from aris.store import Project

    w = ResearchWiki(Project(tmp_path_factory.mktemp("w")))
    c = w.add_node(WikiNode("claim", "c"))
    for v in verdicts:
        w.update_claim_status(c, v)
    hist = w.history(c)
    assert len(hist) == len(verdicts)
    for line, (old, new) in zip(hist, replay_statuses("untested", verdicts)):
        assert line.endswith(f"{old} -> {new}")


node_kinds = st.sampled_from(["paper", "idea", "experiment", "claim"])
statuses = {
    "paper": ["ingested"],
    "idea": ["proposed", "active", "rejected"],
    "experiment": ["planned", "running", "done", "failed"],
    "claim": ["untested", "supported", "partially_supported", "invalidated"],
}


@st.composite
def graphs(draw, max_nodes=60):
    kinds = draw(st.lists(node_kinds, max_size=max_nodes))
    nodes = []
    for i, kind in enumerate(kinds):
        title = draw(st.text(min_size=0, max_size=draw(st.sampled_from([5, 40, 400]))))
        nodes.append((kind, title or f"n{i}", draw(st.sampled_from(statuses[kind]))))
    edges = []
    if nodes:
        idx = st.integers(0, len(nodes) - 1)
        edges = draw(st.lists(st.tuples(idx, idx, st.sampled_from(RELATIONS)), max_size=2 * len(nodes)))
    return nodes, edges


def build(w, graph):
    nodes, edges = graph
    ids = [w.add_node(WikiNode(k, t, status=s)) for k, t, s in nodes]
    for a, b, rel in edges:
        try:
            w.add_edge(WikiEdge(ids[a], ids[b], rel))
        except Exception:
            pass
    return ids


@settings(max_examples=80, deadline=None)
@given(graphs(), st.integers(150, 9000))
def test_pack_never_exceeds_cap(graph, cap):
    w = ResearchWiki("/nonexistent", persist=False)
    build(w, graph)
    pack = w.build_query_pack(cap)
    if len(render_query_pack([], omitted=len(w.query_pack_entries()))) <= cap:
        assert pack.char_count <= cap
    assert pack.char_count == len(pack.text)


def test_pack_cap_on_ten_thousand_nodes():
    w = ResearchWiki("/nonexistent", persist=False)
    for i in range(10_000):
        kind = ("idea", "claim", "experiment", "paper")[i % 4]
        status = {"idea": "rejected", "claim": "supported", "experiment": "done", "paper": "ingested"}[kind]
        w.add_node(WikiNode(kind, f"node {i} " + "t" * (i % 90), status=status))
    pack = w.build_query_pack()
    assert pack.char_count <= QUERY_PACK_CAP
    assert pack.omitted > 0


@settings(max_examples=40, deadline=None)
@given(graphs(max_nodes=25), st.lists(st.integers(0, 24), max_size=6))
def test_banlist_monotone(graph, rejections):
    w = ResearchWiki("/nonexistent", persist=False)
    build(w, graph)
    before = w.banlist()
    ideas = [n for n in w.nodes.values() if n.entity_type == "idea"]
    for r in rejections:
        if ideas:
            w.set_status(ideas[r % len(ideas)].node_id, "rejected")
            after = w.banlist()
            assert before <= after
            before = after


@settings(max_examples=25, deadline=None)
@given(graphs(max_nodes=20))
def test_round_trip_and_canonical_relations(tmp_path_factory, graph):
    from aris.store import Project

    project = Project(tmp_path_factory.mktemp("rt"))
    w = ResearchWiki(project)
    build(w, graph)
    if w.nodes:
        w.tombstone(next(iter(w.nodes)))
    again = ResearchWiki(project)
    assert again.nodes == w.nodes
    assert [(e.src, e.dst, e.relation) for e in again.edges] == [(e.src, e.dst, e.relation) for e in w.edges]
    if w.edges_path.exists():
        for line in w.edges_path.read_text().splitlines():
            assert json.loads(line)["relation"] in RELATIONS


@pytest.mark.parametrize("title", ["\x85", "a b", "tab\there", "naïve 研究"])
def test_titles_with_unusual_characters_round_trip(project, title):
    w = ResearchWiki(project)
    node_id = w.add_node(WikiNode("idea", title))
    assert ResearchWiki(project).get(node_id).title == title
