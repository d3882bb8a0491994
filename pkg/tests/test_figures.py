import json
import math
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aris.errors import DegenerateDirection
from aris.figures.geometry import SHAPES, boundary_residual, clip_edge_endpoint
from aris.figures.spec import validate_spec
from aris.figures.svg import render, render_with_warnings
from aris.figures.text import FontConfig, estimate_text_width, is_wide

GOLDEN = Path(__file__).parent / "golden"
GOLDEN_SPECS = sorted(GOLDEN.glob("*.json"))


def two_nodes(**edge):
    return {
        "spec_version": 1,
        "canvas": {"width": 300, "height": 120},
        "nodes": [
            {"id": "a", "shape": "rect", "center": [60, 60], "size": {"half_width": 40, "half_height": 20}, "label": "A"},
            {"id": "b", "shape": "circle", "center": [220, 60], "size": {"radius": 20}, "label": "B"},
        ],
        "edges": [{"src": "a", "dst": "b", **edge}],
    }


def codes(doc):
    _, issues = validate_spec(doc)
    return {i.code for i in issues}


def test_valid_spec_normalized():
    spec, issues = validate_spec(two_nodes())
    assert issues == [] and len(spec.nodes) == 2 and spec.edges[0].kind == "straight"
    assert spec.node("b").size == (20.0, 20.0)


def test_dangling_edge():
    _, issues = validate_spec(two_nodes(dst="z"))
    assert [i.code for i in issues] == ["DanglingEdge"] and "z" in issues[0].message


def test_unknown_shape():
    doc = two_nodes()
    doc["nodes"][0]["shape"] = "hexagon"
    assert "UnknownShape" in codes(doc)


INVALID = [
    ({"canvas": {"width": 1, "height": 1}, "nodes": []}, "MissingSpecVersion"),
    ({"spec_version": 9, "canvas": {"width": 1, "height": 1}, "nodes": []}, "UnsupportedVersion"),
    ({"spec_version": 1, "nodes": []}, "BadCanvas"),
    ({"spec_version": 1, "canvas": {"width": -5, "height": 1}, "nodes": []}, "BadCanvas"),
    ({"spec_version": 1, "canvas": {"width": 5, "height": 5}, "nodes": [{"id": "a", "shape": "rect", "center": [1, 1], "size": {"half_width": 0, "half_height": 1}}]}, "NonPositiveSize"),
    ({"spec_version": 1, "canvas": {"width": 5, "height": 5}, "nodes": [{"id": "a", "shape": "circle", "center": [1, 1], "size": {}}]}, "MissingField"),
    ({"spec_version": 1, "canvas": {"width": 5, "height": 5}, "nodes": [{"id": "a", "shape": "circle", "center": ["x", 1], "size": {"radius": 1}}]}, "BadCoordinate"),
    ({"spec_version": 1, "canvas": {"width": 5, "height": 5}, "nodes": [{"id": "a", "shape": "circle", "center": [1, 1], "size": {"radius": 1}}] * 2}, "DuplicateNodeId"),
    ({"spec_version": 1, "canvas": {"width": 5, "height": 5}, "nodes": [{"id": "a", "shape": "circle", "center": [1, 1], "size": {"radius": 1}, "style": {"fill": "url(x)"}}]}, "BadColor"),
    (two_nodes(kind="zigzag"), "UnknownEdgeKind"),
    (two_nodes(kind="self_loop"), "BadSelfLoop"),
    (two_nodes(label=3), "BadLabel"),
    (two_nodes(dst="z"), "DanglingEdge"),
    ("not an object", "MissingField"),
]


@pytest.mark.parametrize("doc,code", INVALID, ids=[c for _, c in INVALID])
def test_invalid_corpus_yields_expected_code(doc, code):
    spec, issues = validate_spec(doc)
    assert spec is None and code in {i.code for i in issues}


def test_clip_examples():
    assert clip_edge_endpoint("circle", (0, 0), (2, 2), (10, 0)) == pytest.approx((2, 0))
    assert clip_edge_endpoint("rect", (0, 0), (3, 1), (10, 10)) == pytest.approx((1, 1))
    assert clip_edge_endpoint("ellipse", (0, 0), (4, 1), (0, 9)) == pytest.approx((0, 1))
    with pytest.raises(DegenerateDirection):
        clip_edge_endpoint("rect", (1, 1), (1, 1), (1, 1))


def bisect_exit(f, lo=0.0, hi=1.0, iters=200):
    for _ in range(iters):
        mid = (lo + hi) / 2
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def test_diamond_against_bisection():
    t = bisect_exit(lambda t: abs(5 * t) / 2 + abs(3 * t) / 2 - 1)
    assert clip_edge_endpoint("diamond", (0, 0), (2, 2), (5, 3)) == pytest.approx((5 * t, 3 * t), abs=1e-12)


@pytest.mark.parametrize("shape", SHAPES)
@settings(max_examples=1000, deadline=None)
@given(
    a=st.floats(0.5, 200),
    b=st.floats(0.5, 200),
    angle=st.floats(0, 2 * math.pi),
    dist=st.floats(1.5, 50),
    cx=st.floats(-500, 500),
    cy=st.floats(-500, 500),
)
def test_clip_lies_on_boundary(shape, a, b, angle, dist, cx, cy):
    size = (a, a) if shape == "circle" else (a, b)
    reach = dist * max(size)
    toward = (cx + reach * math.cos(angle), cy + reach * math.sin(angle))
    p = clip_edge_endpoint(shape, (cx, cy), size, toward)
    scale = max(1.0, max(size))
    assert abs(boundary_residual(shape, (cx, cy), size, p)) <= 1e-9 * scale
    # strictly between center and toward
    t = math.hypot(p[0] - cx, p[1] - cy) / math.hypot(toward[0] - cx, toward[1] - cy)
    assert 0 < t < 1


def test_text_width_examples():
    assert estimate_text_width("") == 0
    assert estimate_text_width("AA", FontConfig(narrow_advance=7)) == 14


def test_mixed_width_against_per_char_sum():
    text = "Idea 研究 カタカナ 한국 ｆｕｌｌ ok"
    font = FontConfig()
    cjk = sum(1 for ch in text if is_wide(ch, font))
    latin = len(text) - cjk
    assert cjk == 2 + 4 + 2 + 4
    assert estimate_text_width(text) == latin * 7 + cjk * 14
    assert estimate_text_width(text) == sum(14 if is_wide(c, font) else 7 for c in text)


@given(st.text(max_size=30), st.characters())
def test_width_monotone(text, ch):
    assert estimate_text_width(text + ch) >= estimate_text_width(text)


def test_render_deterministic_and_single_shape():
    doc = {"spec_version": 1, "canvas": {"width": 100, "height": 60},
           "nodes": [{"id": "a", "shape": "rect", "center": [50, 30], "size": {"half_width": 30, "half_height": 15}, "label": "x"}],
           "edges": []}
    spec, _ = validate_spec(doc)
    svg = render(spec)
    assert svg == render(spec)
    text = svg.decode()
    assert sum(text.count(f"<{tag} ") for tag in ("rect", "circle", "ellipse", "polygon")) == 1
    assert text.count('<g class="label">') == 1
    assert "e+" not in text and "e-0" not in text


def test_golden_corpus_size():
    assert len(GOLDEN_SPECS) == 12


@pytest.mark.parametrize("path", GOLDEN_SPECS, ids=[p.stem for p in GOLDEN_SPECS])
def test_golden_byte_equal(path):
    spec, issues = validate_spec(json.loads(path.read_text(encoding="utf-8")))
    assert issues == []
    assert render(spec) == path.with_suffix(".svg").read_bytes()


def test_label_overflow_warns_only():
    spec, _ = validate_spec(json.loads((GOLDEN / "11_custom_font.json").read_text()))
    svg, warnings = render_with_warnings(spec)
    assert svg and len(warnings) == 1
