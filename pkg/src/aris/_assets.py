"""Access to files shipped inside the package."""

from __future__ import annotations

from importlib import resources
from importlib.abc import Traversable


def asset(*parts: str) -> Traversable:
    node = resources.files("aris").joinpath("assets")
    for part in parts:
        node = node.joinpath(part)
    return node


def asset_text(*parts: str) -> str:
    return asset(*parts).read_text(encoding="utf-8")
