"""FigureSpec documents: validation and normalization.

Document shape (JSON)::

    {
      "spec_version": 1,
      "canvas": {"width": 400, "height": 240},
      "font": {"family": "...", "size": 12, "advances": {"narrow": 7, "wide": 14}, "line_height": 16},
      "nodes": [{"id": "a", "shape": "rect", "center": [80, 120],
                 "size": {"half_width": 50, "half_height": 24}, "label": ["Line 1", "Line 2"],
                 "style": {"fill": "#ffffff", "stroke": "#333333"}}],
      "edges": [{"src": "a", "dst": "b", "kind": "curved", "curvature": 30, "label": "x"}]
    }

Size keys: rect/diamond ``half_width`` + ``half_height``, circle ``radius``,
ellipse ``rx`` + ``ry``. ``label`` may be a list of lines or a string with
newlines.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Mapping

from .geometry import SHAPES
from .text import FontConfig

SUPPORTED_VERSIONS = (1,)
EDGE_KINDS = ("straight", "curved", "self_loop")
SIZE_KEYS = {
    "rect": ("half_width", "half_height"),
    "diamond": ("half_width", "half_height"),
    "circle": ("radius",),
    "ellipse": ("rx", "ry"),
}
DEFAULT_FILL = "#ffffff"
DEFAULT_STROKE = "#333333"
DEFAULT_LOOP_RADIUS = 20.0
_COLOR = re.compile(r"^(#[0-9a-fA-F]{3}|#[0-9a-fA-F]{6}|[a-z]{3,20}|none)$")


@dataclass(frozen=True)
class Issue:
    code: str
    where: str
    message: str

    def __str__(self) -> str:
        return f"{self.code} at {self.where}: {self.message}"


@dataclass(frozen=True)
class NodeSpec:
    id: str
    shape: str
    center: tuple[float, float]
    size: tuple[float, float]  # circle: (r, r)
    label_lines: tuple[str, ...] = ()
    fill: str = DEFAULT_FILL
    stroke: str = DEFAULT_STROKE


@dataclass(frozen=True)
class EdgeSpec:
    src: str
    dst: str
    kind: str = "straight"
    label: str = ""
    curvature: float = 0.0
    loop_radius: float = DEFAULT_LOOP_RADIUS


@dataclass(frozen=True)
class FigureSpec:
    width: float
    height: float
    nodes: tuple[NodeSpec, ...]
    edges: tuple[EdgeSpec, ...] = ()
    font: FontConfig = field(default_factory=FontConfig)
    spec_version: int = 1

    def node(self, node_id: str) -> NodeSpec:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise KeyError(node_id)


def _number(value: Any) -> float | None:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return None
    value = float(value)
    return value if math.isfinite(value) else None


class _Collector:
    def __init__(self):
        self.issues: list[Issue] = []

    def add(self, code: str, where: str, message: str) -> None:
        self.issues.append(Issue(code, where, message))


def _parse_font(doc: Any, out: _Collector) -> FontConfig:
    if doc is None:
        return FontConfig()
    if not isinstance(doc, Mapping):
        out.add("BadFont", "font", "font must be an object")
        return FontConfig()
    base = FontConfig()
    advances = doc.get("advances") or {}
    values = {
        "size": doc.get("size", base.size),
        "narrow": advances.get("narrow", base.narrow_advance),
        "wide": advances.get("wide", base.wide_advance),
        "line_height": doc.get("line_height", base.line_height),
    }
    nums = {}
    for key, raw in values.items():
        num = _number(raw)
        if num is None or num <= 0:
            out.add("BadFont", f"font.{key}", f"{key} must be a positive number")
            num = 1.0
        nums[key] = num
    family = doc.get("family", base.family)
    if not isinstance(family, str) or any(c in family for c in "<>&\"'"):
        out.add("BadFont", "font.family", "family must be plain text")
        family = base.family
    return FontConfig(family, nums["size"], nums["narrow"], nums["wide"], nums["line_height"])


def _label_lines(value: Any, where: str, out: _Collector) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, str):
        return tuple(value.split("\n"))
    if isinstance(value, list) and all(isinstance(v, str) for v in value):
        return tuple(value)
    out.add("BadLabel", where, "label must be a string or a list of strings")
    return ()


def _parse_node(i: int, raw: Any, out: _Collector) -> NodeSpec | None:
    where = f"nodes[{i}]"
    if not isinstance(raw, Mapping):
        out.add("MissingField", where, "node must be an object")
        return None
    ok = True
    node_id = raw.get("id")
    if not isinstance(node_id, str) or not node_id:
        out.add("MissingField", f"{where}.id", "node id is required")
        ok = False
    shape = raw.get("shape")
    if shape is None:
        out.add("MissingField", f"{where}.shape", "shape is required")
        ok = False
    elif shape not in SHAPES:
        out.add("UnknownShape", f"{where}.shape", f"{shape!r} is not one of {', '.join(SHAPES)}")
        ok = False
    center = raw.get("center")
    cx = cy = None
    if isinstance(center, Mapping):
        cx, cy = _number(center.get("x")), _number(center.get("y"))
    elif isinstance(center, (list, tuple)) and len(center) == 2:
        cx, cy = _number(center[0]), _number(center[1])
    if center is None:
        out.add("MissingField", f"{where}.center", "center is required")
        ok = False
    elif cx is None or cy is None:
        out.add("BadCoordinate", f"{where}.center", "center must be two finite numbers")
        ok = False
    size = (1.0, 1.0)
    if shape in SIZE_KEYS:
        raw_size = raw.get("size")
        if not isinstance(raw_size, Mapping):
            out.add("MissingField", f"{where}.size", f"size needs {', '.join(SIZE_KEYS[shape])}")
            ok = False
        else:
            vals = []
            for key in SIZE_KEYS[shape]:
                if key not in raw_size:
                    out.add("MissingField", f"{where}.size.{key}", f"{key} is required for {shape}")
                    ok = False
                    continue
                num = _number(raw_size[key])
                if num is None or num <= 0:
                    out.add("NonPositiveSize", f"{where}.size.{key}", f"{key} must be a positive number")
                    ok = False
                    continue
                vals.append(num)
            if ok and len(vals) == len(SIZE_KEYS[shape]):
                size = (vals[0], vals[0]) if shape == "circle" else (vals[0], vals[1])
    style = raw.get("style") or {}
    fill, stroke = DEFAULT_FILL, DEFAULT_STROKE
    if isinstance(style, Mapping):
        for key in ("fill", "stroke"):
            if key in style and not (isinstance(style[key], str) and _COLOR.match(style[key])):
                out.add("BadColor", f"{where}.style.{key}", "colors are #rgb, #rrggbb, or a lowercase name")
                ok = False
        fill = style.get("fill", fill)
        stroke = style.get("stroke", stroke)
    label = _label_lines(raw.get("label"), f"{where}.label", out)
    if not ok:
        return None
    return NodeSpec(node_id, shape, (cx, cy), size, label, fill, stroke)


def _parse_edge(i: int, raw: Any, ids: set[str], centers: dict[str, tuple[float, float]], out: _Collector) -> EdgeSpec | None:
    where = f"edges[{i}]"
    if not isinstance(raw, Mapping):
        out.add("MissingField", where, "edge must be an object")
        return None
    ok = True
    for key in ("src", "dst"):
        value = raw.get(key)
        if not isinstance(value, str) or not value:
            out.add("MissingField", f"{where}.{key}", f"{key} is required")
            ok = False
        elif value not in ids:
            out.add("DanglingEdge", f"{where}.{key}", f"no node with id {value!r}")
            ok = False
    src, dst = raw.get("src"), raw.get("dst")
    kind = raw.get("kind", "self_loop" if src is not None and src == dst else "straight")
    if kind not in EDGE_KINDS:
        out.add("UnknownEdgeKind", f"{where}.kind", f"{kind!r} is not one of {', '.join(EDGE_KINDS)}")
        ok = False
    elif (kind == "self_loop") != (src == dst):
        out.add("BadSelfLoop", f"{where}.kind", "self_loop edges need src == dst, and only they may")
        ok = False
    curvature = _number(raw.get("curvature", 0.0))
    if curvature is None:
        out.add("BadCoordinate", f"{where}.curvature", "curvature must be a finite number")
        ok = False
    loop_radius = _number(raw.get("loop_radius", DEFAULT_LOOP_RADIUS))
    if loop_radius is None or loop_radius <= 0:
        out.add("NonPositiveSize", f"{where}.loop_radius", "loop_radius must be a positive number")
        ok = False
    label = raw.get("label", "")
    if not isinstance(label, str):
        out.add("BadLabel", f"{where}.label", "edge label must be a string")
        ok = False
    if ok and kind != "self_loop" and src in centers and centers[src] == centers.get(dst):
        out.add("CoincidentEndpoints", where, f"{src} and {dst} share a center")
        ok = False
    if not ok:
        return None
    return EdgeSpec(src, dst, kind, label, curvature or 0.0, loop_radius)


def validate_spec(document: Any) -> tuple[FigureSpec | None, list[Issue]]:
    """Collect every problem; return a normalized spec only when there are none."""
    out = _Collector()
    if not isinstance(document, Mapping):
        out.add("MissingField", "$", "a figure spec must be a JSON object")
        return None, out.issues
    version = document.get("spec_version")
    if version is None:
        out.add("MissingSpecVersion", "spec_version", "spec_version is required")
    elif isinstance(version, bool) or version not in SUPPORTED_VERSIONS:
        out.add("UnsupportedVersion", "spec_version", f"supported versions: {SUPPORTED_VERSIONS}")
    canvas = document.get("canvas")
    width = height = None
    if not isinstance(canvas, Mapping):
        out.add("BadCanvas", "canvas", "canvas with width and height is required")
    else:
        width, height = _number(canvas.get("width")), _number(canvas.get("height"))
        if width is None or width <= 0 or height is None or height <= 0:
            out.add("BadCanvas", "canvas", "canvas width and height must be positive numbers")
    font = _parse_font(document.get("font"), out)
    raw_nodes = document.get("nodes")
    if not isinstance(raw_nodes, list):
        out.add("MissingField", "nodes", "nodes must be a list")
        raw_nodes = []
    nodes: list[NodeSpec] = []
    ids: set[str] = set()
    for i, raw in enumerate(raw_nodes):
        node = _parse_node(i, raw, out)
        raw_id = raw.get("id") if isinstance(raw, Mapping) else None
        if isinstance(raw_id, str) and raw_id:
            if raw_id in ids:
                out.add("DuplicateNodeId", f"nodes[{i}].id", f"id {raw_id!r} is used twice")
                node = None
            ids.add(raw_id)
        if node is not None:
            nodes.append(node)
    centers = {n.id: n.center for n in nodes}
    raw_edges = document.get("edges", [])
    if not isinstance(raw_edges, list):
        out.add("MissingField", "edges", "edges must be a list")
        raw_edges = []
    edges = [e for i, raw in enumerate(raw_edges) if (e := _parse_edge(i, raw, ids, centers, out)) is not None]
    if out.issues:
        return None, out.issues
    return FigureSpec(width, height, tuple(nodes), tuple(edges), font, int(version)), []


def spec_to_document(spec: FigureSpec) -> dict[str, Any]:
    """Canonical document form of a normalized spec (defaults filled, fixed key order)."""
    nodes = []
    for n in spec.nodes:
        keys = SIZE_KEYS[n.shape]
        size = {keys[0]: n.size[0]} if n.shape == "circle" else {keys[0]: n.size[0], keys[1]: n.size[1]}
        nodes.append(
            {
                "id": n.id,
                "shape": n.shape,
                "center": [n.center[0], n.center[1]],
                "size": size,
                "label": list(n.label_lines),
                "style": {"fill": n.fill, "stroke": n.stroke},
            }
        )
    edges = [
        {"src": e.src, "dst": e.dst, "kind": e.kind, "label": e.label, "curvature": e.curvature, "loop_radius": e.loop_radius}
        for e in spec.edges
    ]
    return {
        "spec_version": spec.spec_version,
        "canvas": {"width": spec.width, "height": spec.height},
        "font": spec.font.to_dict(),
        "nodes": nodes,
        "edges": edges,
    }
