"""FigureSpec -> SVG 1.1, byte-deterministic.

Only sqrt/hypot and the four arithmetic operations touch coordinates, and
every number is printed with a fixed 3-decimal formatter, so output does not
depend on the platform's libm or locale.
"""

from __future__ import annotations

import logging
import math
from xml.sax.saxutils import escape, quoteattr

from .geometry import Point, clip_edge_endpoint
from .spec import EdgeSpec, FigureSpec, NodeSpec
from .text import estimate_text_width

logger = logging.getLogger(__name__)

RENDERER_VERSION = 1
# loop legs leave the node 25 degrees either side of straight up
_SIN25 = 0.42261826174069944
_COS25 = 0.90630778703664994
_FAR = 1e6


def fmt(value: float) -> str:
    text = f"{value:.3f}"
    return "0.000" if text == "-0.000" else text


def _pt(p: Point) -> str:
    return f"{fmt(p[0])},{fmt(p[1])}"


def _clip(node: NodeSpec, toward: Point) -> Point:
    return clip_edge_endpoint(node.shape, node.center, node.size, toward)


def _shape_element(node: NodeSpec) -> str:
    cx, cy = node.center
    a, b = node.size
    paint = f'fill={quoteattr(node.fill)} stroke={quoteattr(node.stroke)} stroke-width="1.500"'
    if node.shape == "rect":
        return f'<rect x="{fmt(cx - a)}" y="{fmt(cy - b)}" width="{fmt(2 * a)}" height="{fmt(2 * b)}" {paint}/>'
    if node.shape == "circle":
        return f'<circle cx="{fmt(cx)}" cy="{fmt(cy)}" r="{fmt(a)}" {paint}/>'
    if node.shape == "ellipse":
        return f'<ellipse cx="{fmt(cx)}" cy="{fmt(cy)}" rx="{fmt(a)}" ry="{fmt(b)}" {paint}/>'
    points = " ".join(_pt(p) for p in ((cx, cy - b), (cx + a, cy), (cx, cy + b), (cx - a, cy)))
    return f'<polygon points="{points}" {paint}/>'


def _label_group(lines: tuple[str, ...], center: Point, spec: FigureSpec) -> str:
    font = spec.font
    n = len(lines)
    first = center[1] - (n - 1) * font.line_height / 2 + font.size * 0.35
    parts = [f'<g class="label"><text font-family={quoteattr(font.family)} font-size="{fmt(font.size)}" text-anchor="start">']
    for i, line in enumerate(lines):
        x = center[0] - estimate_text_width(line, font) / 2
        y = first + i * font.line_height
        parts.append(f'<tspan x="{fmt(x)}" y="{fmt(y)}">{escape(line)}</tspan>')
    parts.append("</text></g>")
    return "".join(parts)


def _label_fits(node: NodeSpec, spec: FigureSpec) -> list[str]:
    warnings = []
    inner = 2 * node.size[0]
    for line in node.label_lines:
        width = estimate_text_width(line, spec.font)
        if width > inner:
            warnings.append(f"label line {line!r} of node {node.id} is {fmt(width)}px wide, node is {fmt(inner)}px")
    height = len(node.label_lines) * spec.font.line_height
    if height > 2 * node.size[1]:
        warnings.append(f"label of node {node.id} is {fmt(height)}px tall, node is {fmt(2 * node.size[1])}px")
    return warnings


def _edge_label(text: str, at: Point, spec: FigureSpec) -> str:
    if not text:
        return ""
    x = at[0] - estimate_text_width(text, spec.font) / 2
    return (
        f'<text class="edge-label" x="{fmt(x)}" y="{fmt(at[1] - 4)}" font-family={quoteattr(spec.font.family)} '
        f'font-size="{fmt(spec.font.size)}" text-anchor="start">{escape(text)}</text>'
    )


def _edge(edge: EdgeSpec, spec: FigureSpec) -> str:
    src, dst = spec.node(edge.src), spec.node(edge.dst)
    if edge.kind == "self_loop":
        cx, cy = src.center
        leg1 = (_SIN25, -_COS25)
        leg2 = (-_SIN25, -_COS25)
        p1 = _clip(src, (cx + leg1[0] * _FAR, cy + leg1[1] * _FAR))
        p2 = _clip(src, (cx + leg2[0] * _FAR, cy + leg2[1] * _FAR))
        r = 2 * edge.loop_radius
        c1 = (p1[0] + leg1[0] * r, p1[1] + leg1[1] * r)
        c2 = (p2[0] + leg2[0] * r, p2[1] + leg2[1] * r)
        d = f"M{_pt(p1)} C{_pt(c1)} {_pt(c2)} {_pt(p2)}"
        label_at = (
            (p1[0] + 3 * c1[0] + 3 * c2[0] + p2[0]) / 8,
            (p1[1] + 3 * c1[1] + 3 * c2[1] + p2[1]) / 8,
        )
    elif edge.kind == "curved" and edge.curvature != 0:
        (x1, y1), (x2, y2) = src.center, dst.center
        dx, dy = x2 - x1, y2 - y1
        length = math.hypot(dx, dy)
        normal = (-dy / length, dx / length)
        mid = ((x1 + x2) / 2, (y1 + y2) / 2)
        ctrl = (mid[0] + edge.curvature * normal[0], mid[1] + edge.curvature * normal[1])
        start, end = _clip(src, ctrl), _clip(dst, ctrl)
        d = f"M{_pt(start)} Q{_pt(ctrl)} {_pt(end)}"
        label_at = (
            0.25 * start[0] + 0.5 * ctrl[0] + 0.25 * end[0],
            0.25 * start[1] + 0.5 * ctrl[1] + 0.25 * end[1],
        )
    else:
        start, end = _clip(src, dst.center), _clip(dst, src.center)
        d = f"M{_pt(start)} L{_pt(end)}"
        label_at = ((start[0] + end[0]) / 2, (start[1] + end[1]) / 2)
    path = f'<path class="edge {edge.kind}" d="{d}" fill="none" stroke="#333333" stroke-width="1.200" marker-end="url(#arrow)"/>'
    return path + _edge_label(edge.label, label_at, spec)


def render_with_warnings(spec: FigureSpec) -> tuple[bytes, list[str]]:
    warnings: list[str] = []
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{fmt(spec.width)}" height="{fmt(spec.height)}" '
        f'viewBox="0 0 {fmt(spec.width)} {fmt(spec.height)}" data-spec-version="{spec.spec_version}" '
        f'data-renderer-version="{RENDERER_VERSION}">',
        '<defs><marker id="arrow" viewBox="0 0 10 10" refX="10" refY="5" markerWidth="8" markerHeight="8" '
        'orient="auto-start-reverse"><path d="M0,0 L10,5 L0,10 z" fill="#333333"/></marker></defs>',
        '<g class="edges">',
    ]
    out += [_edge(e, spec) for e in spec.edges]
    out.append("</g>")
    out.append('<g class="nodes">')
    for node in spec.nodes:
        warnings += _label_fits(node, spec)
        out.append(f'<g class="node" id={quoteattr("node-" + node.id)}>')
        out.append(_shape_element(node))
        out.append(_label_group(node.label_lines, node.center, spec))
        out.append("</g>")
    out.append("</g>")
    out.append("</svg>")
    for w in warnings:
        logger.warning(w)
    return ("\n".join(out) + "\n").encode("utf-8"), warnings


def render(spec: FigureSpec) -> bytes:
    return render_with_warnings(spec)[0]
