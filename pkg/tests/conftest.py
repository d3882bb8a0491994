import os

os.environ["ARIS_TEST_MODE"] = "1"

from pathlib import Path  # noqa: E402

import pytest  # noqa: E402

from aris.bridges import BridgeConfig, BridgeHub, MockBridge, MockScript  # noqa: E402
from aris.config import mock_only_config  # noqa: E402
from aris.store import ArtifactStore, Project  # noqa: E402


@pytest.fixture
def project(tmp_path: Path) -> Project:
    return Project(tmp_path / "proj")


@pytest.fixture
def store(project: Project) -> ArtifactStore:
    return ArtifactStore(project)


@pytest.fixture
def mock_config():
    return mock_only_config()


def mock_bridge(bridge_id: str, script, family: str | None = None) -> MockBridge:
    """A mock bridge with an inline script (list of replies or a rules mapping)."""
    config = BridgeConfig(bridge_id, kind="mock", family=family or bridge_id, script="inline")
    data = MockScript.from_data(script)
    return MockBridge(config, data)


def hub_with(project: Project | None = None, **scripts) -> BridgeHub:
    hub = BridgeHub({}, project=project)
    for bridge_id, script in scripts.items():
        hub.install(mock_bridge(bridge_id.replace("_", "-"), script))
    return hub


def review_block(score: float, items=(), prose: str = "Review follows.") -> str:
    lines = [f"score: {score}", "items:"] if items else [f"score: {score}", "items: []"]
    for item_id, severity, text in items:
        lines.append(f"  - id: {item_id}")
        lines.append(f"    severity: {severity}")
        lines.append(f"    description: {text}")
    return prose + "\n```review\n" + "\n".join(lines) + "\n```\n"


def scripted_hub(project: Project, config, executor_rules=(), reviewer_rules=()) -> BridgeHub:
    """The offline mock bridges with extra rules tried before the bundled ones."""
    hub = config.hub(project)
    for bridge_id, extra in (("mock-executor", executor_rules), ("mock-reviewer", reviewer_rules)):
        bridge_config = config.bridges[bridge_id]
        script = MockScript.load(bridge_config.script)
        script.rules[:0] = MockScript.from_data({"rules": list(extra)}).rules
        hub.install(MockBridge(bridge_config, script))
    return hub


W2_SCORES = [5.0, 6.0, 7.0, 7.5]

W2_REVIEWER_RULES = [
    {
        "match": "Objective: Review the narrative",
        "replies": [
            review_block(5.0, [("C1", "critical", "claims outrun the evidence"), ("C2", "critical", "no seed variance")]),
            review_block(6.0),
            review_block(7.0, [("C4", "critical", "limitations section missing")]),
            review_block(7.5),
        ],
    }
]


def _revise(resolved) -> str:
    body = "# Narrative report\n\nRevised text.\n"
    return f"```artifact NARRATIVE_REPORT\n{body}```\n```resolved\n{list(resolved)!r}\n```\n".replace("'", "")


W2_EXECUTOR_RULES = [
    {
        "match": r"Skill: auto-review-loop\b.*Task: revise",
        "replies": [_revise(["C1", "C2"]), _revise([]), _revise(["C4"])],
    }
]


def w2_inputs(root: Path) -> dict:
    root.mkdir(parents=True, exist_ok=True)
    log = root / "experiment_log.md"
    log.write_text("# Experiment log\n\nThree seeds, ten epochs, accuracy 91.3 vs baseline 88.1.\n")
    results = root / "results.json"
    results.write_text('{"accuracy": 91.3, "baseline_accuracy": 88.1, "seeds": 3}\n')
    return {"EXPERIMENT_LOG": log, "EXPERIMENT_RESULTS": results}


# -- acceptance reporting --------------------------------------------------

_CRITERIA: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    failed = report.failed or (report.when == "setup" and report.skipped)
    if report.when == "call" or failed:
        previous = _CRITERIA.get(number, (title, "PASS"))[1]
        _CRITERIA[number] = (title, "FAIL" if failed or previous == "FAIL" else "PASS")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, status = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {title}")
