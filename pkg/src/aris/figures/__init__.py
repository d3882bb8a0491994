"""Declarative figure specs rendered to deterministic SVG."""

from .geometry import SHAPES, boundary_residual, clip_edge_endpoint, clip_param
from .spec import EdgeSpec, FigureSpec, Issue, NodeSpec, spec_to_document, validate_spec
from .svg import RENDERER_VERSION, fmt, render, render_with_warnings
from .text import FontConfig, estimate_text_width

__all__ = [
    "RENDERER_VERSION",
    "SHAPES",
    "EdgeSpec",
    "FigureSpec",
    "FontConfig",
    "Issue",
    "NodeSpec",
    "boundary_residual",
    "clip_edge_endpoint",
    "clip_param",
    "estimate_text_width",
    "fmt",
    "render",
    "render_with_warnings",
    "spec_to_document",
    "validate_spec",
]
