"""Skill files, the three-tier skill registry, and the shared reference documents."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from ._assets import asset, asset_text
from . import frontmatter
from .errors import (
    DuplicateSkill,
    MalformedFrontmatter,
    MissingField,
    SkillNotFound,
    UnknownReference,
)

logger = logging.getLogger(__name__)

DEFAULT_CATEGORY = "Uncategorized"

# canonical key first, then accepted aliases
_TRIGGER_KEYS = ("triggers", "trigger", "trigger_conditions")
_TOOL_KEYS = ("allowed-tools", "allowed_tools", "tools")

SHARED_REFERENCES = (
    "reviewer-independence",
    "experiment-integrity",
    "effort-contract",
    "citation-discipline",
    "writing-principles",
)


class Tier(str, Enum):
    USER = "user"
    PROJECT = "project"
    BUNDLED = "bundled"

    @property
    def priority(self) -> int:
        return _TIER_PRIORITY[self]


_TIER_PRIORITY = {Tier.USER: 0, Tier.PROJECT: 1, Tier.BUNDLED: 2}


@dataclass(frozen=True)
class SkillSpec:
    name: str
    description: str
    body: str
    tier: Tier = Tier.BUNDLED
    source_path: str = ""
    triggers: tuple[str, ...] = ()
    allowed_tools: tuple[str, ...] = ()
    category: str = DEFAULT_CATEGORY
    # unknown frontmatter keys, kept so community skills survive a rewrite
    extra: tuple[tuple[str, Any], ...] = field(default=())


@dataclass(frozen=True)
class SharedReference:
    name: str
    content: str


def _as_str_list(value: Any, key: str) -> tuple[str, ...]:
    if value is None:
        return ()
    if isinstance(value, list):
        return tuple(str(v) for v in value if v is not None)
    if isinstance(value, (str, int, float)):
        return (str(value),)
    raise MalformedFrontmatter(f"key {key!r} must be a string or a list of strings")


def _pop_first(meta: dict[str, Any], keys: Iterable[str]) -> tuple[str | None, Any]:
    for key in keys:
        if key in meta:
            return key, meta.pop(key)
    return None, None


def parse_skill(text: str, tier: Tier | str = Tier.BUNDLED, path: str | Path = "") -> SkillSpec:
    """Parse a skill file into a :class:`SkillSpec`.

    Raises MissingFrontmatter, MalformedFrontmatter or MissingField.
    """
    meta, body = frontmatter.parse(text)
    meta = dict(meta)
    for required in ("name", "description"):
        value = meta.get(required)
        if value is None or (isinstance(value, str) and not value.strip()):
            raise MissingField(required, str(path) or None)
    name = meta.pop("name")
    description = meta.pop("description")
    if not isinstance(name, str) or not isinstance(description, str):
        raise MalformedFrontmatter("name and description must be strings")
    key, triggers = _pop_first(meta, _TRIGGER_KEYS)
    triggers = _as_str_list(triggers, key or "triggers")
    key, tools = _pop_first(meta, _TOOL_KEYS)
    tools = _as_str_list(tools, key or "allowed-tools")
    category = meta.pop("category", None)
    category = str(category) if category not in (None, "") else DEFAULT_CATEGORY
    return SkillSpec(
        name=name.strip(),
        description=description,
        body=body,
        tier=Tier(tier),
        source_path=str(path),
        triggers=triggers,
        allowed_tools=tools,
        category=category,
        extra=tuple(meta.items()),
    )


def serialize_skill(spec: SkillSpec) -> str:
    meta: dict[str, Any] = {
        "name": spec.name,
        "description": spec.description,
        "category": spec.category,
        "triggers": list(spec.triggers),
        "allowed-tools": list(spec.allowed_tools),
    }
    for key, value in spec.extra:
        meta[key] = value
    return frontmatter.dump(meta, spec.body)


class SkillRegistry:
    """Immutable view over skills from all tiers.

    Resolution only depends on which (tier, name) pairs exist, never on the
    order they were loaded in. Reloading builds a new registry.
    """

    def __init__(self, specs: Iterable[SkillSpec] = ()):
        by_tier: dict[Tier, dict[str, SkillSpec]] = {t: {} for t in Tier}
        for spec in specs:
            bucket = by_tier[spec.tier]
            if spec.name in bucket:
                raise DuplicateSkill(
                    f"skill {spec.name!r} defined twice in tier {spec.tier.value}: "
                    f"{bucket[spec.name].source_path} and {spec.source_path}"
                )
            bucket[spec.name] = spec
        self._by_tier = by_tier

    def __contains__(self, name: str) -> bool:
        return any(name in bucket for bucket in self._by_tier.values())

    def __len__(self) -> int:
        return len(self.names())

    def names(self) -> list[str]:
        found: set[str] = set()
        for bucket in self._by_tier.values():
            found.update(bucket)
        return sorted(found)

    def all_specs(self) -> list[SkillSpec]:
        return [spec for tier in Tier for _, spec in sorted(self._by_tier[tier].items())]

    def resolve(self, name: str) -> SkillSpec:
        for tier in sorted(Tier, key=lambda t: t.priority):
            spec = self._by_tier[tier].get(name)
            if spec is not None:
                return spec
        raise SkillNotFound(f"no skill named {name!r}")

    def list_skills(self, category: str | None = None) -> list[tuple[str, str, str]]:
        rows = []
        for name in self.names():
            spec = self.resolve(name)
            if category is not None and spec.category != category:
                continue
            rows.append((spec.name, spec.category, spec.tier.value))
        return rows

    @classmethod
    def discover(
        cls,
        user_root: Path | None = None,
        project_root: Path | None = None,
        include_bundled: bool = True,
    ) -> "SkillRegistry":
        specs: list[SkillSpec] = []
        if user_root is not None:
            specs.extend(load_skill_dir(Path(user_root), Tier.USER))
        if project_root is not None:
            specs.extend(load_skill_dir(Path(project_root), Tier.PROJECT))
        if include_bundled:
            specs.extend(bundled_skills())
        return cls(specs)


def resolve_skill(name: str, registry: SkillRegistry) -> SkillSpec:
    return registry.resolve(name)


def list_skills(registry: SkillRegistry, category_filter: str | None = None) -> list[tuple[str, str, str]]:
    return registry.list_skills(category_filter)


def _skill_files(root: Path) -> list[Path]:
    if not root.is_dir():
        return []
    files = set(root.glob("*/SKILL.md")) | {p for p in root.glob("*.md") if p.is_file()}
    return sorted(files)


def load_skill_dir(root: Path, tier: Tier) -> list[SkillSpec]:
    """Load ``<root>/<name>/SKILL.md`` and ``<root>/<name>.md`` files."""
    specs = []
    for path in _skill_files(root):
        text = path.read_text(encoding="utf-8")
        specs.append(parse_skill(text, tier, path))
    return specs


def bundled_skills() -> list[SkillSpec]:
    specs = []
    skills_dir = asset("skills")
    for entry in sorted(skills_dir.iterdir(), key=lambda p: p.name):
        skill_file = entry.joinpath("SKILL.md")
        if not skill_file.is_file():
            continue
        text = skill_file.read_text(encoding="utf-8")
        specs.append(parse_skill(text, Tier.BUNDLED, f"bundled:{entry.name}/SKILL.md"))
    return specs


def load_shared_reference(name: str) -> SharedReference:
    key = name[:-3] if name.endswith(".md") else name
    if key not in SHARED_REFERENCES:
        raise UnknownReference(
            f"{name!r} is not a shared reference; known: {', '.join(SHARED_REFERENCES)}"
        )
    content = asset_text("references", f"{key}.md")
    return SharedReference(name=key, content=content)
