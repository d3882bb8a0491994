"""Command runners for experiment steps.

``FixtureRunner`` returns a prepared result file and is what offline runs and
tests use. ``SubprocessRunner`` executes the shell commands found in the
experiment code's ``bash``/``sh`` blocks.
"""

from __future__ import annotations

import json
import re
import subprocess
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

from .._assets import asset

_SHELL_BLOCK = re.compile(r"```(?:bash|sh|shell)[ \t]*\n(.*?)```", re.S)
_ERROR_PATTERNS = (
    ("dependency_missing", re.compile(r"ModuleNotFoundError|No module named|command not found|ImportError", re.I)),
    ("oom", re.compile(r"out of memory|OutOfMemoryError|MemoryError|Killed", re.I)),
    ("timeout", re.compile(r"timed? ?out", re.I)),
    ("assertion_failure", re.compile(r"AssertionError", re.I)),
)


@dataclass(frozen=True)
class CommandResult:
    ok: bool
    output: str = ""
    suffix: str = ".txt"
    error_class: str = "other"
    message: str = ""


class CommandRunner(Protocol):
    def run(self, code: str, cwd: Path) -> CommandResult: ...


def classify_error(text: str) -> str:
    for name, pattern in _ERROR_PATTERNS:
        if pattern.search(text):
            return name
    return "other"


def shell_commands(code: str) -> list[str]:
    out = []
    for block in _SHELL_BLOCK.findall(code):
        for line in block.splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                out.append(line)
    return out


class FixtureRunner:
    """``builtin:<file>`` names a fixture shipped in the package's mock assets."""

    def __init__(self, path: str | Path):
        self.ref = str(path)
        self.path = Path(path)

    def run(self, code: str, cwd: Path) -> CommandResult:
        if self.ref.startswith("builtin:"):
            name = self.ref.split(":", 1)[1]
            entry = asset("mock").joinpath(name)
            if not entry.is_file():
                return CommandResult(False, error_class="other", message=f"fixture {self.ref} not found")
            return CommandResult(True, entry.read_text(encoding="utf-8"), Path(name).suffix or ".txt")
        path = self.path if self.path.is_absolute() else Path(cwd) / self.path
        if not str(self.path) or not path.is_file():
            return CommandResult(False, error_class="other", message=f"fixture {self.path} not found")
        return CommandResult(True, path.read_text(encoding="utf-8"), path.suffix or ".txt")


class SubprocessRunner:
    def __init__(self, timeout: float = 3600.0):
        self.timeout = timeout

    def run(self, code: str, cwd: Path) -> CommandResult:
        commands = shell_commands(code)
        if not commands:
            return CommandResult(False, error_class="other", message="the experiment code has no shell block to run")
        output = ""
        for command in commands:
            try:
                proc = subprocess.run(
                    command, shell=True, cwd=cwd, capture_output=True, text=True, timeout=self.timeout
                )
            except subprocess.TimeoutExpired:
                return CommandResult(False, error_class="timeout", message=f"{command!r} timed out after {self.timeout}s")
            if proc.returncode != 0:
                err = proc.stderr or proc.stdout
                return CommandResult(False, error_class=classify_error(err), message=f"{command!r} exited {proc.returncode}: {err[-2000:]}")
            output = proc.stdout
        try:
            json.loads(output)
            suffix = ".json"
        except ValueError:
            suffix = ".txt"
        return CommandResult(True, output, suffix)
