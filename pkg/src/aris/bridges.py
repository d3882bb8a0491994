"""Executor/reviewer model access.

Every named bridge (codex, oracle, claude, gemini, minimax, llm-chat) is a
configuration of one chat-completions client; ``mock`` bridges replay a script
and never touch the network.
"""

from __future__ import annotations

import json
import logging
import math
import os
import random
import re
import time
from dataclasses import dataclass, field, replace
from decimal import Decimal
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol, Sequence

import httpx
import yaml

from ._assets import asset_text
from .errors import (
    AuthMissing,
    BridgeFailure,
    BridgeTimeout,
    NetworkDisabled,
    ProviderError,
    ScriptExhausted,
    UnknownBridge,
    UnknownRoute,
)
from .store import Project, append_line, read_jsonl, utcnow

logger = logging.getLogger(__name__)

TEST_MODE_ENV = "ARIS_TEST_MODE"
ROLES = ("system", "user", "assistant")


def test_mode_enabled() -> bool:
    return os.environ.get(TEST_MODE_ENV, "").lower() in ("1", "true", "yes")


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def to_wire(self) -> dict[str, str]:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class TokenUsage:
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cost_estimate: Decimal = Decimal(0)


@dataclass(frozen=True)
class ChatExchange:
    bridge_id: str
    model: str
    messages: tuple[Message, ...]
    reply: str
    usage: TokenUsage


@dataclass(frozen=True)
class BridgeConfig:
    bridge_id: str
    kind: str = "chat"  # "chat" or "mock"
    endpoint: str = ""
    model: str = ""
    family: str = ""
    reasoning_effort: str = ""
    # "wire" sends reasoning_effort as a request field, "preamble" as a system line
    reasoning_mode: str = "wire"
    auth_env: str = ""
    script: str = ""
    timeout: float = 120.0
    # attach raw artifact bytes to review prompts for models without file access
    inline_artifacts: bool = False

    def validate(self) -> None:
        if self.kind == "mock":
            if not self.script:
                raise ValueError(f"mock bridge {self.bridge_id!r} needs a script")
        elif self.kind == "chat":
            if not self.endpoint:
                raise ValueError(f"bridge {self.bridge_id!r} needs an endpoint")
        else:
            raise ValueError(f"bridge {self.bridge_id!r}: unknown kind {self.kind!r}")


DEFAULT_BRIDGES: dict[str, BridgeConfig] = {
    "codex": BridgeConfig(
        "codex", endpoint="https://api.openai.com/v1", model="gpt-5.4", family="gpt",
        reasoning_effort="xhigh", auth_env="OPENAI_API_KEY",
    ),
    "oracle": BridgeConfig(
        "oracle", endpoint="https://api.openai.com/v1", model="gpt-5.4-pro", family="gpt",
        reasoning_effort="xhigh", auth_env="OPENAI_API_KEY",
    ),
    "claude": BridgeConfig(
        "claude", endpoint="https://api.anthropic.com/v1", model="claude-sonnet-4-5", family="claude",
        auth_env="ANTHROPIC_API_KEY",
    ),
    "gemini": BridgeConfig(
        "gemini", endpoint="https://generativelanguage.googleapis.com/v1beta/openai", model="gemini-2.5-pro",
        family="gemini", auth_env="GEMINI_API_KEY",
    ),
    "minimax": BridgeConfig(
        "minimax", endpoint="https://api.minimax.io/v1", model="MiniMax-M1", family="minimax",
        auth_env="MINIMAX_API_KEY",
    ),
    "llm-chat": BridgeConfig(
        "llm-chat", endpoint="http://localhost:8000/v1", model="", family="generic", auth_env="LLM_CHAT_API_KEY",
    ),
}

MOCK_BRIDGES: dict[str, BridgeConfig] = {
    "mock-executor": BridgeConfig("mock-executor", kind="mock", family="mock-executor", script="builtin:offline-executor"),
    "mock-reviewer": BridgeConfig("mock-reviewer", kind="mock", family="mock-reviewer", script="builtin:offline-reviewer"),
}


@dataclass
class RouteConfig:
    default_review: str = "codex"
    executor: str = "claude"
    rescue: str = ""
    aliases: dict[str, str] = field(default_factory=lambda: {"oracle-pro": "oracle"})
    allow_fallback: bool = False
    fallback: str = "llm-chat"


def resolve_route(directive_value: str | None, routes: RouteConfig, bridge_ids: Iterable[str] = ()) -> str:
    """Map a ``reviewer:`` directive value to a configured bridge id."""
    known = set(bridge_ids)
    if not directive_value:
        return routes.default_review
    value = directive_value.strip()
    if value in routes.aliases:
        return routes.aliases[value]
    if value in known:
        return value
    if routes.allow_fallback:
        return routes.fallback
    raise UnknownRoute(f"no bridge or alias named {value!r}")


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


class Bridge(Protocol):
    config: BridgeConfig

    def send(self, messages: Sequence[Message]) -> ChatExchange: ...


def _check_messages(messages: Sequence[Message]) -> None:
    if not messages:
        raise ValueError("at least one message is required")
    prev = None
    for i, msg in enumerate(messages):
        if msg.role not in ROLES:
            raise ValueError(f"message {i}: unknown role {msg.role!r}")
        if msg.role == "system" and i != 0:
            raise ValueError("a system message may only come first")
        if msg.role != "system" and msg.role == prev:
            raise ValueError(f"message {i}: roles must alternate")
        prev = msg.role
    if messages[-1].role != "user":
        raise ValueError("the last message must come from the user")


# -- mock -----------------------------------------------------------------


@dataclass(frozen=True)
class ScriptedReply:
    content: str
    prompt_tokens: int | None = None
    completion_tokens: int | None = None


def _coerce_reply(item: Any) -> ScriptedReply:
    if isinstance(item, str):
        return ScriptedReply(item)
    if isinstance(item, Mapping):
        return ScriptedReply(
            str(item.get("content", "")),
            item.get("prompt_tokens"),
            item.get("completion_tokens"),
        )
    raise ValueError(f"unsupported scripted reply: {item!r}")


@dataclass
class MockRule:
    pattern: re.Pattern
    replies: list[ScriptedReply]
    # a rule with one reply repeats it; a sequence is consumed and then stops matching
    sequence: bool = False


@dataclass
class MockScript:
    """Queued replies first, then the first matching rule, then the fallback."""

    replies: list[ScriptedReply] = field(default_factory=list)
    rules: list[MockRule] = field(default_factory=list)
    fallback: ScriptedReply | None = None

    @classmethod
    def from_data(cls, data: Any) -> "MockScript":
        if isinstance(data, list):
            return cls(replies=[_coerce_reply(x) for x in data])
        if not isinstance(data, Mapping):
            raise ValueError("mock script must be a list or a mapping")
        rules = []
        for rule in data.get("rules") or []:
            pattern = re.compile(rule["match"], re.S)
            if "replies" in rule:
                rules.append(MockRule(pattern, [_coerce_reply(x) for x in rule["replies"]], sequence=True))
            else:
                rules.append(MockRule(pattern, [_coerce_reply(rule["reply"])]))
        fallback = data.get("fallback")
        return cls(
            replies=[_coerce_reply(x) for x in data.get("replies") or []],
            rules=rules,
            fallback=_coerce_reply(fallback) if fallback is not None else None,
        )

    @classmethod
    def load(cls, ref: str, base_dir: Path | None = None) -> "MockScript":
        if ref.startswith("builtin:"):
            name = ref.split(":", 1)[1]
            text = asset_text("mock", f"{name}.yaml")
        else:
            path = Path(ref)
            if not path.is_absolute() and base_dir is not None:
                path = base_dir / path
            text = path.read_text(encoding="utf-8")
        return cls.from_data(yaml.safe_load(text))


class MockBridge:
    def __init__(self, config: BridgeConfig, script: MockScript | Sequence[Any] | None = None, base_dir: Path | None = None):
        self.config = config
        if script is None:
            script = MockScript.load(config.script, base_dir)
        elif not isinstance(script, MockScript):
            script = MockScript.from_data(list(script))
        self.script = script
        self.cursor = 0
        self.rule_cursors = [0] * len(self.script.rules)
        self.transcript: list[ChatExchange] = []

    def state(self) -> dict[str, Any]:
        return {"queue": self.cursor, "rules": list(self.rule_cursors)}

    def restore(self, state: Mapping[str, Any] | int) -> None:
        if isinstance(state, int):
            self.cursor = state
            return
        self.cursor = int(state.get("queue", 0))
        rules = [int(x) for x in state.get("rules", [])]
        self.rule_cursors = (rules + [0] * len(self.script.rules))[: len(self.script.rules)]

    def _next(self, messages: Sequence[Message]) -> ScriptedReply:
        if self.cursor < len(self.script.replies):
            reply = self.script.replies[self.cursor]
            self.cursor += 1
            return reply
        last_user = next((m.content for m in reversed(messages) if m.role == "user"), "")
        for n, rule in enumerate(self.script.rules):
            if not rule.pattern.search(last_user):
                continue
            if not rule.sequence:
                return rule.replies[0]
            if self.rule_cursors[n] < len(rule.replies):
                self.rule_cursors[n] += 1
                return rule.replies[self.rule_cursors[n] - 1]
        if self.script.fallback is not None:
            return self.script.fallback
        raise ScriptExhausted(f"mock bridge {self.config.bridge_id!r} has no scripted reply left")

    def send(self, messages: Sequence[Message]) -> ChatExchange:
        _check_messages(messages)
        scripted = self._next(messages)
        prompt_text = "".join(m.content for m in messages)
        usage = TokenUsage(
            prompt_tokens=scripted.prompt_tokens if scripted.prompt_tokens is not None else estimate_tokens(prompt_text),
            completion_tokens=(
                scripted.completion_tokens
                if scripted.completion_tokens is not None
                else estimate_tokens(scripted.content)
            ),
        )
        exchange = ChatExchange(self.config.bridge_id, self.config.model or "mock", tuple(messages), scripted.content, usage)
        self.transcript.append(exchange)
        return exchange


# -- chat-completions wire ---------------------------------------------------


class ChatBridge:
    """Chat-completions client. One retry on transport failure or 5xx, never on 4xx."""

    def __init__(
        self,
        config: BridgeConfig,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
        rng: random.Random | None = None,
    ):
        if transport is None and test_mode_enabled():
            raise NetworkDisabled(f"network bridge {config.bridge_id!r} requested in test mode")
        self.config = config
        self.api_key = os.environ.get(config.auth_env, "") if config.auth_env else ""
        if config.auth_env and not self.api_key:
            raise AuthMissing(f"bridge {config.bridge_id!r} needs ${config.auth_env}")
        self._client = httpx.Client(transport=transport, timeout=config.timeout)
        self._sleep = sleep
        self._rng = rng or random.Random()

    def request_body(self, messages: Sequence[Message]) -> dict[str, Any]:
        wire = [m.to_wire() for m in messages]
        body: dict[str, Any] = {"model": self.config.model}
        effort = self.config.reasoning_effort
        if effort and self.config.reasoning_mode == "wire":
            body["reasoning_effort"] = effort
        elif effort and self.config.reasoning_mode == "preamble":
            wire.insert(0, {"role": "system", "content": f"Reasoning effort: {effort}."})
        body["messages"] = wire
        return body

    def _post(self, body: dict[str, Any]) -> httpx.Response:
        url = self.config.endpoint.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        return self._client.post(url, json=body, headers=headers)

    def send(self, messages: Sequence[Message]) -> ChatExchange:
        _check_messages(messages)
        body = self.request_body(messages)
        last_error: Exception | None = None
        for attempt in range(2):
            if attempt:
                self._sleep(self._rng.uniform(0.5, 1.5))
            try:
                response = self._post(body)
            except httpx.TimeoutException as exc:
                last_error = BridgeTimeout(f"{self.config.bridge_id}: request timed out")
                last_error.__cause__ = exc
                continue
            except httpx.TransportError as exc:
                last_error = BridgeFailure(f"{self.config.bridge_id}: transport error: {exc}")
                continue
            if 400 <= response.status_code < 500:
                raise ProviderError(response.status_code, response.text)
            if response.status_code >= 500:
                last_error = ProviderError(response.status_code, response.text)
                continue
            return self._parse(messages, response)
        assert last_error is not None
        raise last_error

    def _parse(self, messages: Sequence[Message], response: httpx.Response) -> ChatExchange:
        try:
            data = response.json()
            reply = data["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BridgeFailure(f"{self.config.bridge_id}: malformed response body") from exc
        usage = data.get("usage") or {}
        prompt_text = "".join(m.content for m in messages)
        return ChatExchange(
            self.config.bridge_id,
            data.get("model", self.config.model),
            tuple(messages),
            reply,
            TokenUsage(
                prompt_tokens=int(usage.get("prompt_tokens", estimate_tokens(prompt_text))),
                completion_tokens=int(usage.get("completion_tokens", estimate_tokens(reply))),
            ),
        )


# -- cost accounting -------------------------------------------------------


@dataclass(frozen=True)
class Price:
    input: Decimal = Decimal(0)
    output: Decimal = Decimal(0)


def price_usage(usage: TokenUsage, price: Price | None) -> Decimal:
    if price is None:
        return Decimal(0)
    return usage.prompt_tokens * price.input + usage.completion_tokens * price.output


@dataclass
class BridgeCost:
    calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cost: Decimal = Decimal(0)

    def add(self, other: "BridgeCost") -> None:
        self.calls += other.calls
        self.prompt_tokens += other.prompt_tokens
        self.completion_tokens += other.completion_tokens
        self.cost += other.cost


@dataclass
class CostReport:
    per_bridge: dict[str, BridgeCost]
    total: BridgeCost


def cost_ledger_path(project: Project, run_id: str) -> Path:
    return project.run_dir(run_id) / "cost.jsonl"


def record_cost(project: Project, run_id: str, exchange: ChatExchange) -> None:
    line = {
        "ts": utcnow(),
        "bridge": exchange.bridge_id,
        "model": exchange.model,
        "prompt_tokens": exchange.usage.prompt_tokens,
        "completion_tokens": exchange.usage.completion_tokens,
        "cost": str(exchange.usage.cost_estimate),
    }
    append_line(cost_ledger_path(project, run_id), json.dumps(line, sort_keys=True))


def summarize_cost_lines(lines: Iterable[Mapping[str, Any]]) -> CostReport:
    per: dict[str, BridgeCost] = {}
    total = BridgeCost()
    for obj in lines:
        row = BridgeCost(
            calls=1,
            prompt_tokens=int(obj.get("prompt_tokens", 0)),
            completion_tokens=int(obj.get("completion_tokens", 0)),
            cost=Decimal(str(obj.get("cost", "0"))),
        )
        per.setdefault(str(obj.get("bridge", "?")), BridgeCost()).add(row)
        total.add(row)
    return CostReport(dict(sorted(per.items())), total)


def cost_report(project: Project, run_id: str | None = None) -> CostReport:
    """Totals per bridge; ``run_id=None`` aggregates every run in the project."""
    if run_id is not None:
        paths = [cost_ledger_path(project, run_id)]
    else:
        paths = sorted((project.aris / "runs").glob("*/cost.jsonl"))
    lines: list[dict] = []
    for path in paths:
        records, _ = read_jsonl(path)
        lines.extend(records)
    return summarize_cost_lines(lines)


# -- hub -------------------------------------------------------------------


class BridgeHub:
    """Configured bridges, lazily constructed, with per-run cost recording."""

    def __init__(
        self,
        configs: Mapping[str, BridgeConfig],
        prices: Mapping[str, Price] | None = None,
        project: Project | None = None,
        transports: Mapping[str, httpx.BaseTransport] | None = None,
    ):
        self.configs = dict(configs)
        self.prices = dict(prices or {})
        self.project = project
        self._transports = dict(transports or {})
        self._bridges: dict[str, Bridge] = {}

    def get(self, bridge_id: str) -> Bridge:
        if bridge_id not in self._bridges:
            try:
                config = self.configs[bridge_id]
            except KeyError:
                raise UnknownBridge(f"bridge {bridge_id!r} is not configured") from None
            config.validate()
            if config.kind == "mock":
                base = self.project.root if self.project else None
                self._bridges[bridge_id] = MockBridge(config, base_dir=base)
            else:
                self._bridges[bridge_id] = ChatBridge(config, transport=self._transports.get(bridge_id))
        return self._bridges[bridge_id]

    def install(self, bridge: Bridge) -> None:
        """Register a pre-built bridge (e.g. a MockBridge with an inline script)."""
        self.configs[bridge.config.bridge_id] = bridge.config
        self._bridges[bridge.config.bridge_id] = bridge

    def family(self, bridge_id: str) -> str:
        config = self.configs.get(bridge_id)
        return config.family if config else ""

    def send(self, bridge_id: str, messages: Sequence[Message], run_id: str | None = None) -> ChatExchange:
        exchange = self.get(bridge_id).send(messages)
        cost = price_usage(exchange.usage, self.prices.get(bridge_id))
        exchange = replace(exchange, usage=replace(exchange.usage, cost_estimate=cost))
        if run_id and self.project is not None:
            record_cost(self.project, run_id, exchange)
        return exchange

    def mock_cursors(self) -> dict[str, dict[str, Any]]:
        return {bid: b.state() for bid, b in sorted(self._bridges.items()) if isinstance(b, MockBridge)}

    def restore_cursors(self, cursors: Mapping[str, Any]) -> None:
        for bid, state in cursors.items():
            bridge = self.get(bid)
            if isinstance(bridge, MockBridge):
                bridge.restore(state)


def send_chat(hub: BridgeHub, bridge_id: str, messages: Sequence[Message], run_id: str | None = None) -> ChatExchange:
    return hub.send(bridge_id, messages, run_id)
