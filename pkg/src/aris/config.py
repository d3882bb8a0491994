"""Project configuration stored as TOML at ``.aris/config.toml``.

Only environment-variable *names* are stored for credentials; a table that
carries a literal secret is rejected on load and on save.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields, replace
from decimal import Decimal
from pathlib import Path
from typing import Any, Mapping

import tomli
import tomli_w

from .bridges import DEFAULT_BRIDGES, MOCK_BRIDGES, BridgeConfig, BridgeHub, Price, RouteConfig
from .errors import IoFailure
from .meta import AnalysisConfig
from .review import DEFAULT_ERROR_CLASSES, DEFAULT_SCOPE_PATTERNS, ConvergencePolicy, RemediationPolicy
from .store import Project, atomic_write

logger = logging.getLogger(__name__)

EFFORT_NAMES = ("lite", "balanced", "max", "beast")
OFFLINE_FIXTURE = "builtin:offline-results.json"
SECRET_KEYS = ("api_key", "apikey", "token", "secret", "password", "key")


class ConfigError(ValueError):
    pass


@dataclass
class EffortConfig:
    default: str = "balanced"
    beast_multiplier: float = 5.0


@dataclass
class ExperimentConfig:
    # "fixture" copies a prepared result file; "subprocess" runs the code's commands
    runner: str = "fixture"
    fixture: str = ""
    timeout: float = 3600.0


@dataclass
class ArisConfig:
    bridges: dict[str, BridgeConfig] = field(default_factory=lambda: dict(DEFAULT_BRIDGES))
    routes: RouteConfig = field(default_factory=RouteConfig)
    prices: dict[str, Price] = field(default_factory=dict)
    scope_patterns: dict[str, tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_SCOPE_PATTERNS))
    error_classes: dict[str, tuple[str, ...]] = field(default_factory=lambda: dict(DEFAULT_ERROR_CLASSES))
    convergence: ConvergencePolicy = field(default_factory=ConvergencePolicy)
    remediation: RemediationPolicy = field(default_factory=RemediationPolicy)
    meta: AnalysisConfig = field(default_factory=AnalysisConfig)
    effort: EffortConfig = field(default_factory=EffortConfig)
    experiments: ExperimentConfig = field(default_factory=ExperimentConfig)
    user_skills: str = "~/.aris/skills"
    terminology: str = ""
    proof_taxonomy: str = ""

    def validate(self) -> None:
        for bid, bridge in self.bridges.items():
            if bid != bridge.bridge_id:
                raise ConfigError(f"bridge table {bid!r} names itself {bridge.bridge_id!r}")
            bridge.validate()
        for role, bid in (("default_review", self.routes.default_review), ("executor", self.routes.executor)):
            if bid not in self.bridges:
                raise ConfigError(f"route {role} points at unknown bridge {bid!r}")
        if self.routes.rescue and self.routes.rescue not in self.bridges:
            raise ConfigError(f"rescue route points at unknown bridge {self.routes.rescue!r}")
        if self.effort.default not in EFFORT_NAMES:
            raise ConfigError(f"unknown default effort {self.effort.default!r}")
        if self.experiments.runner not in ("fixture", "subprocess"):
            raise ConfigError(f"unknown experiment runner {self.experiments.runner!r}")

    def hub(self, project: Project | None = None) -> BridgeHub:
        return BridgeHub(self.bridges, self.prices, project)

    def remediation_policy(self) -> RemediationPolicy:
        if self.remediation.rescue_route or not self.routes.rescue:
            return self.remediation
        return replace(self.remediation, rescue_route=self.routes.rescue)


def mock_only_config() -> ArisConfig:
    """Fully offline: scripted executor and reviewer, no network bridges."""
    config = ArisConfig(bridges=dict(MOCK_BRIDGES))
    config.routes = RouteConfig(default_review="mock-reviewer", executor="mock-executor", aliases={}, fallback="mock-reviewer")
    config.experiments = ExperimentConfig(runner="fixture", fixture=OFFLINE_FIXTURE)
    return config


# -- TOML mapping ----------------------------------------------------------


def _check_no_secrets(table: Mapping[str, Any], where: str) -> None:
    for key in table:
        if key.lower() in SECRET_KEYS:
            raise ConfigError(f"{where}.{key}: store the environment variable name in auth_env, not the secret")


def _bridge_from(bid: str, table: Mapping[str, Any]) -> BridgeConfig:
    _check_no_secrets(table, f"bridges.{bid}")
    known = {f.name for f in fields(BridgeConfig)}
    extra = set(table) - known
    if extra:
        raise ConfigError(f"bridges.{bid}: unknown keys {sorted(extra)}")
    data = dict(table)
    data["bridge_id"] = bid
    return BridgeConfig(**data)


def _dataclass_from(cls, table: Mapping[str, Any], where: str):
    known = {f.name for f in fields(cls)}
    extra = set(table) - known
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    return cls(**table)


def config_from_dict(data: Mapping[str, Any]) -> ArisConfig:
    config = ArisConfig()
    if "bridges" in data:
        config.bridges = {bid: _bridge_from(bid, t) for bid, t in data["bridges"].items()}
    if "routes" in data:
        config.routes = _dataclass_from(RouteConfig, data["routes"], "routes")
    if "prices" in data:
        config.prices = {
            bid: Price(Decimal(str(t.get("input", "0"))), Decimal(str(t.get("output", "0"))))
            for bid, t in data["prices"].items()
        }
    if "scope_patterns" in data:
        config.scope_patterns = {k: tuple(v) for k, v in data["scope_patterns"].items()}
    if "error_classes" in data:
        config.error_classes = {k: tuple(v) for k, v in data["error_classes"].items()}
    if "convergence" in data:
        config.convergence = _dataclass_from(ConvergencePolicy, data["convergence"], "convergence")
    if "remediation" in data:
        rem = dict(data["remediation"])
        if rem.get("rescue_route") == "":
            rem["rescue_route"] = None
        config.remediation = _dataclass_from(RemediationPolicy, rem, "remediation")
    if "meta" in data:
        config.meta = _dataclass_from(AnalysisConfig, data["meta"], "meta")
    if "effort" in data:
        config.effort = _dataclass_from(EffortConfig, data["effort"], "effort")
    if "experiments" in data:
        config.experiments = _dataclass_from(ExperimentConfig, data["experiments"], "experiments")
    paths = data.get("paths", {})
    config.user_skills = str(paths.get("user_skills", config.user_skills))
    config.terminology = str(paths.get("terminology", config.terminology))
    config.proof_taxonomy = str(paths.get("proof_taxonomy", config.proof_taxonomy))
    config.validate()
    return config


def config_to_dict(config: ArisConfig) -> dict[str, Any]:
    rem = asdict(config.remediation)
    rem["rescue_route"] = rem["rescue_route"] or ""
    return {
        "bridges": {bid: {k: v for k, v in asdict(b).items() if k != "bridge_id"} for bid, b in config.bridges.items()},
        "routes": asdict(config.routes),
        "prices": {bid: {"input": str(p.input), "output": str(p.output)} for bid, p in config.prices.items()},
        "scope_patterns": {k: list(v) for k, v in config.scope_patterns.items()},
        "error_classes": {k: list(v) for k, v in config.error_classes.items()},
        "convergence": asdict(config.convergence),
        "remediation": rem,
        "meta": asdict(config.meta),
        "effort": asdict(config.effort),
        "experiments": asdict(config.experiments),
        "paths": {
            "user_skills": config.user_skills,
            "terminology": config.terminology,
            "proof_taxonomy": config.proof_taxonomy,
        },
    }


def dumps(config: ArisConfig) -> str:
    config.validate()
    return tomli_w.dumps(config_to_dict(config))


def loads(text: str) -> ArisConfig:
    try:
        data = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    return config_from_dict(data)


def load_config(project: Project) -> ArisConfig:
    """The project's config, or built-in defaults when none has been written."""
    path = project.config_path
    if not path.exists():
        return ArisConfig()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"could not read {path}: {exc}") from exc
    return loads(text)


def save_config(project: Project, config: ArisConfig) -> Path:
    path = project.config_path
    try:
        atomic_write(path, dumps(config).encode("utf-8"))
    except OSError as exc:
        raise IoFailure(f"could not write {path}: {exc}") from exc
    return path
