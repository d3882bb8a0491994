"""Effort presets scale breadth, depth and iteration parameters; reviewer reasoning never changes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping

from ..errors import InvalidValue

REVIEWER_REASONING = "xhigh"
TAGS = ("breadth", "depth", "iteration", "invariant")
BEAST_DEFAULT = 5.0
BEAST_CAP = 8.0


@dataclass(frozen=True)
class EffortPreset:
    name: str
    breadth_mult: Fraction
    depth_mult: Fraction
    iter_mult: Fraction
    reviewer_reasoning: str = REVIEWER_REASONING

    def multiplier(self, tag: str) -> Fraction:
        return {"breadth": self.breadth_mult, "depth": self.depth_mult, "iteration": self.iter_mult}[tag]


def _uniform(name: str, mult: float | str) -> EffortPreset:
    m = Fraction(str(mult))
    if m <= 0:
        raise InvalidValue(f"{name} multiplier must be positive")
    return EffortPreset(name, m, m, m)


def effort_preset(name: str, beast_multiplier: float = BEAST_DEFAULT) -> EffortPreset:
    if name == "lite":
        return _uniform(name, "0.4")
    if name == "balanced":
        return _uniform(name, "1")
    if name == "max":
        return _uniform(name, "2.5")
    if name == "beast":
        if not 0 < beast_multiplier <= BEAST_CAP:
            raise InvalidValue(f"beast multiplier must be in (0, {BEAST_CAP}], got {beast_multiplier}")
        return _uniform(name, beast_multiplier)
    raise InvalidValue(f"unknown effort preset {name!r}")


PRESETS = {name: effort_preset(name) for name in ("lite", "balanced", "max", "beast")}


@dataclass(frozen=True)
class TaggedParam:
    value: Any
    tag: str = "invariant"

    def __post_init__(self):
        if self.tag not in TAGS:
            raise InvalidValue(f"unknown parameter tag {self.tag!r}")
        if self.tag != "invariant" and (isinstance(self.value, bool) or not isinstance(self.value, (int, float))):
            raise InvalidValue(f"a {self.tag} parameter must be numeric, got {self.value!r}")


def scale(value: int | float, mult: Fraction) -> int:
    """Multiply exactly, round up, never below one."""
    return max(1, math.ceil(Fraction(str(value)) * mult))


def apply_effort(preset: EffortPreset | str, base_params: Mapping[str, TaggedParam]) -> dict[str, Any]:
    if isinstance(preset, str):
        preset = effort_preset(preset)
    out: dict[str, Any] = {}
    for name, param in base_params.items():
        if param.tag == "invariant":
            out[name] = param.value
        else:
            out[name] = scale(param.value, preset.multiplier(param.tag))
    out["reviewer_reasoning"] = preset.reviewer_reasoning
    return out
