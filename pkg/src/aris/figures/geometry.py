"""Shape-aware edge clipping.

Each shape is star-shaped around its center, so the exit point along the ray
``center + t * (toward - center)`` has a closed form in ``t``.
"""

from __future__ import annotations

import math

from ..errors import DegenerateDirection

SHAPES = ("rect", "circle", "ellipse", "diamond")

Point = tuple[float, float]


def clip_param(shape: str, center: Point, size: tuple[float, float], toward: Point) -> float:
    """Ray parameter ``t`` of the boundary crossing; ``t < 1`` when ``toward`` lies outside."""
    dx, dy = toward[0] - center[0], toward[1] - center[1]
    if dx == 0 and dy == 0:
        raise DegenerateDirection(f"direction from {center} toward {toward} is zero")
    a, b = size
    if shape == "circle":
        return a / math.hypot(dx, dy)
    if shape == "ellipse":
        return 1.0 / math.sqrt((dx / a) ** 2 + (dy / b) ** 2)
    if shape == "rect":
        return 1.0 / max(abs(dx) / a, abs(dy) / b)
    if shape == "diamond":
        return 1.0 / (abs(dx) / a + abs(dy) / b)
    raise ValueError(f"unknown shape {shape!r}")


def clip_edge_endpoint(shape: str, center: Point, size: tuple[float, float], toward: Point) -> Point:
    """Point where the segment from ``center`` toward ``toward`` leaves the shape."""
    t = clip_param(shape, center, size, toward)
    return (center[0] + t * (toward[0] - center[0]), center[1] + t * (toward[1] - center[1]))


def boundary_residual(shape: str, center: Point, size: tuple[float, float], point: Point) -> float:
    """Signed value of the shape's implicit boundary function (zero on the boundary)."""
    x, y = point[0] - center[0], point[1] - center[1]
    a, b = size
    if shape == "circle":
        return math.hypot(x, y) - a
    if shape == "ellipse":
        return math.sqrt((x / a) ** 2 + (y / b) ** 2) - 1.0
    if shape == "rect":
        return max(abs(x) / a, abs(y) / b) - 1.0
    if shape == "diamond":
        return abs(x) / a + abs(y) / b - 1.0
    raise ValueError(f"unknown shape {shape!r}")
