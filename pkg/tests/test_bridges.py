import json
from decimal import Decimal

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aris.bridges import (
    DEFAULT_BRIDGES,
    BridgeConfig,
    BridgeHub,
    ChatBridge,
    Message,
    Price,
    RouteConfig,
    cost_ledger_path,
    cost_report,
    resolve_route,
    send_chat,
    summarize_cost_lines,
)
from aris.config import ArisConfig, mock_only_config
from aris.errors import AuthMissing, NetworkDisabled, ProviderError, ScriptExhausted, UnknownRoute

from conftest import hub_with, mock_bridge

USER = [Message("user", "hello")]


def test_scripted_then_exhausted():
    hub = hub_with(m=["ok"])
    assert send_chat(hub, "m", USER).reply == "ok"
    with pytest.raises(ScriptExhausted):
        send_chat(hub, "m", USER)


def test_auth_missing_before_io(monkeypatch):
    calls = []
    transport = httpx.MockTransport(lambda req: calls.append(req) or httpx.Response(200))
    monkeypatch.delenv("OPENAI_API_KEY", raising=False)
    with pytest.raises(AuthMissing):
        ChatBridge(DEFAULT_BRIDGES["codex"], transport=transport)
    assert calls == []


def test_test_mode_blocks_network():
    with pytest.raises(NetworkDisabled):
        ArisConfig().hub().get("codex")


def test_routes():
    routes = RouteConfig()
    ids = DEFAULT_BRIDGES.keys()
    assert resolve_route(None, routes, ids) == "codex"
    assert resolve_route("oracle-pro", routes, ids) == "oracle"
    assert resolve_route("gemini", routes, ids) == "gemini"
    with pytest.raises(UnknownRoute):
        resolve_route("frontier-x", routes, ids)
    assert resolve_route("frontier-x", RouteConfig(allow_fallback=True), ids) == "llm-chat"


def test_cost_report(project):
    assert cost_report(project, "none").total.cost == 0
    hub = hub_with(project, a=[{"content": "x", "prompt_tokens": 100, "completion_tokens": 50}] * 2)
    hub.prices["a"] = Price(Decimal(1), Decimal(2))
    send_chat(hub, "a", USER, run_id="r")
    send_chat(hub, "a", USER, run_id="r")
    report = cost_report(project, "r")
    assert report.total.cost == 2 * (100 * 1 + 50 * 2)
    assert report.per_bridge["a"].calls == 2
    assert report.total.prompt_tokens == 200 and report.total.completion_tokens == 100


def test_mixed_bridges_subtotals(project):
    hub = hub_with(project, a=["1", "2"], b=["3"])
    hub.prices = {"a": Price(Decimal("0.5"), Decimal("1")), "b": Price(Decimal("2"), Decimal("3"))}
    for bid in ("a", "b", "a"):
        send_chat(hub, bid, USER, run_id="r")
    report = cost_report(project, "r")
    assert sum(c.cost for c in report.per_bridge.values()) == report.total.cost
    assert set(report.per_bridge) == {"a", "b"}


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.sampled_from("xyz"), st.integers(0, 5000), st.integers(0, 5000)), max_size=20))
def test_ledger_replay_reproduces_report(tmp_path_factory, calls):
    from aris.store import Project

    project = Project(tmp_path_factory.mktemp("c"))
    hub = BridgeHub({}, prices={b: Price(Decimal(i + 1), Decimal("0.01")) for i, b in enumerate("xyz")}, project=project)
    for b in "xyz":
        hub.install(mock_bridge(b, [{"content": "r", "prompt_tokens": p, "completion_tokens": c} for x, p, c in calls if x == b]))
    live = {}
    for b, _, _ in calls:
        ex = hub.send(b, USER, "r")
        live[b] = live.get(b, Decimal(0)) + ex.usage.cost_estimate
    lines = [json.loads(x) for x in cost_ledger_path(project, "r").read_text().splitlines()] if calls else []
    replay = summarize_cost_lines(lines)
    assert replay == cost_report(project, "r")
    for b, total in live.items():
        assert replay.per_bridge[b].cost == total


def test_mock_determinism():
    script = {"rules": [{"match": "a", "replies": ["1", "2"]}, {"match": ".", "reply": "any"}], "fallback": "fb"}
    runs = []
    for _ in range(2):
        hub = hub_with(m=script)
        runs.append([hub.send("m", [Message("user", t)]) for t in ("a", "a", "a", "b")])
    assert runs[0] == runs[1]
    assert [e.reply for e in runs[0]] == ["1", "2", "any", "any"]


def test_mock_cursor_restore():
    script = {"rules": [{"match": "a", "replies": ["1", "2", "3"]}]}
    b = mock_bridge("m", script)
    b.send([Message("user", "a")])
    state = b.state()
    b2 = mock_bridge("m", script)
    b2.restore(state)
    assert b2.send([Message("user", "a")]).reply == "2"


def test_message_validation():
    hub = hub_with(m=["x"] * 5)
    for bad in ([], [Message("assistant", "x")], [Message("user", "a"), Message("user", "b")]):
        with pytest.raises(ValueError):
            hub.send("m", bad)


def _ok(body):
    return httpx.Response(200, json={"choices": [{"message": {"content": "fine"}}], "usage": {"prompt_tokens": 3, "completion_tokens": 1}})


def test_chat_bridge_wire(monkeypatch):
    monkeypatch.setenv("OPENAI_API_KEY", "sk-test")
    seen = []

    def handler(request):
        seen.append(json.loads(request.content))
        assert request.headers["authorization"] == "Bearer sk-test"
        return _ok(request)

    bridge = ChatBridge(DEFAULT_BRIDGES["codex"], transport=httpx.MockTransport(handler))
    ex = bridge.send(USER)
    assert ex.reply == "fine" and ex.usage.prompt_tokens == 3
    assert seen[0]["reasoning_effort"] == "xhigh" and seen[0]["model"] == "gpt-5.4"


def test_chat_bridge_preamble_mode():
    cfg = BridgeConfig("x", endpoint="http://h", model="m", reasoning_effort="xhigh", reasoning_mode="preamble")
    body = ChatBridge(cfg, transport=httpx.MockTransport(_ok)).request_body(USER)
    assert body["messages"][0] == {"role": "system", "content": "Reasoning effort: xhigh."}
    assert "reasoning_effort" not in body


def test_retry_once_on_5xx_never_on_4xx():
    cfg = BridgeConfig("x", endpoint="http://h", model="m")
    codes = iter([503, 200])
    bridge = ChatBridge(cfg, transport=httpx.MockTransport(lambda r: httpx.Response(next(codes), json={"choices": [{"message": {"content": "ok"}}]})), sleep=lambda s: None)
    assert bridge.send(USER).reply == "ok"
    count = []

    def four(r):
        count.append(1)
        return httpx.Response(400, text="bad")

    bridge = ChatBridge(cfg, transport=httpx.MockTransport(four), sleep=lambda s: None)
    with pytest.raises(ProviderError):
        bridge.send(USER)
    assert len(count) == 1


def test_mock_only_config_has_no_network_bridges():
    cfg = mock_only_config()
    cfg.validate()
    assert all(b.kind == "mock" for b in cfg.bridges.values())
