"""File-system-as-state persistence.

Layout under ``<project>/.aris/``::

    artifacts/<logical_name>/<version>.md     artifact bytes
    state/manifest.jsonl                      header line + one record per write
    state/checkpoints/<run_id>.json           latest checkpoint of a run
    state/writer.lock                         advisory single-writer lock

Writes go to a temp file, are fsynced and renamed into place, and only then
indexed, so the manifest never points at bytes whose digest it does not match.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Mapping

from .errors import (
    CorruptCheckpoint,
    IoFailure,
    NotFound,
    UnknownRun,
    VersionNotFound,
    WriterLockHeld,
)

logger = logging.getLogger(__name__)

HASH_ALGORITHM = "sha256"
MANIFEST_FORMAT = 1
_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9_.\-]*$")


def utcnow() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


def digest(data: bytes, algorithm: str = HASH_ALGORITHM) -> str:
    return hashlib.new(algorithm, data).hexdigest()


def atomic_write(path: Path, data: bytes) -> None:
    """Write ``data`` to ``path`` via temp file + fsync + rename."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def append_line(path: Path, line: str) -> None:
    """Append one newline-terminated line, repairing a torn tail first."""
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = line.rstrip("\n") + "\n"
    with open(path, "ab+") as fh:
        fh.seek(0, os.SEEK_END)
        if fh.tell() > 0:
            fh.seek(-1, os.SEEK_END)
            if fh.read(1) != b"\n":
                payload = "\n" + payload
        fh.write(payload.encode("utf-8"))
        fh.flush()
        os.fsync(fh.fileno())


def read_jsonl(path: Path) -> tuple[list[dict], list[str]]:
    """Read a JSONL file, skipping unparseable lines. Returns ``(records, warnings)``."""
    records: list[dict] = []
    warnings: list[str] = []
    if not path.exists():
        return records, warnings
    with open(path, "r", encoding="utf-8", errors="replace") as fh:
        for lineno, raw in enumerate(fh, 1):
            text = raw.strip()
            if not text:
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError:
                warnings.append(f"{path.name}:{lineno}: skipped torn or corrupt line")
                continue
            if isinstance(obj, dict):
                records.append(obj)
            else:
                warnings.append(f"{path.name}:{lineno}: skipped non-object line")
    return records, warnings


def _pid_alive(pid: int) -> bool:
    if pid <= 0:
        return False
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


class ProjectLock:
    """Advisory, re-entrant single-writer lock backed by an O_EXCL lock file.

    Two ``ProjectLock`` instances on the same directory are two sessions, even
    inside one process; the second one gets :class:`WriterLockHeld`.
    """

    def __init__(self, path: Path):
        self.path = path
        self._depth = 0
        self._mutex = threading.RLock()

    @property
    def held(self) -> bool:
        return self._depth > 0

    def acquire(self) -> None:
        with self._mutex:
            if self._depth:
                self._depth += 1
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            for _ in range(2):
                try:
                    fd = os.open(self.path, os.O_CREAT | os.O_EXCL | os.O_WRONLY, 0o644)
                except FileExistsError:
                    owner = self._owner()
                    if owner is not None and not _pid_alive(owner):
                        logger.warning("removing stale writer lock held by dead pid %s", owner)
                        self.path.unlink(missing_ok=True)
                        continue
                    raise WriterLockHeld(
                        f"another session (pid {owner}) holds the writer lock at {self.path}"
                    ) from None
                with os.fdopen(fd, "w") as fh:
                    fh.write(str(os.getpid()))
                self._depth = 1
                return
            raise WriterLockHeld(f"could not acquire writer lock at {self.path}")

    def release(self) -> None:
        with self._mutex:
            if not self._depth:
                return
            self._depth -= 1
            if self._depth == 0:
                self.path.unlink(missing_ok=True)

    def _owner(self) -> int | None:
        try:
            return int(self.path.read_text().strip() or "0")
        except (OSError, ValueError):
            return None

    def __enter__(self) -> "ProjectLock":
        self.acquire()
        return self

    def __exit__(self, *exc) -> None:
        self.release()


class Project:
    """Paths for one project directory plus its writer lock."""

    def __init__(self, root: str | Path):
        self.root = Path(root).resolve()
        self.aris = self.root / ".aris"
        self.lock = ProjectLock(self.aris / "state" / "writer.lock")

    @property
    def artifacts_dir(self) -> Path:
        return self.aris / "artifacts"

    @property
    def state_dir(self) -> Path:
        return self.aris / "state"

    @property
    def manifest_path(self) -> Path:
        return self.state_dir / "manifest.jsonl"

    @property
    def checkpoints_dir(self) -> Path:
        return self.state_dir / "checkpoints"

    @property
    def wiki_dir(self) -> Path:
        return self.aris / "wiki"

    @property
    def meta_dir(self) -> Path:
        return self.aris / "meta"

    @property
    def skills_dir(self) -> Path:
        return self.aris / "skills"

    @property
    def workflows_dir(self) -> Path:
        return self.aris / "workflows"

    @property
    def config_path(self) -> Path:
        return self.aris / "config.toml"

    def run_dir(self, run_id: str) -> Path:
        return self.aris / "runs" / run_id

    def relpath(self, path: str | Path) -> str:
        p = Path(path)
        if not p.is_absolute():
            p = self.root / p
        try:
            return p.resolve().relative_to(self.root).as_posix()
        except ValueError:
            return p.resolve().as_posix()


@dataclass(frozen=True)
class ArtifactRecord:
    logical_name: str
    version: int
    path: str
    content_hash: str
    producer: str
    created_at: str
    no_op: bool = False

    def to_json(self) -> dict[str, Any]:
        return {
            "name": self.logical_name,
            "version": self.version,
            "path": self.path,
            "hash": self.content_hash,
            "producer": self.producer,
            "timestamp": self.created_at,
            "no_op": self.no_op,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "ArtifactRecord":
        return cls(
            logical_name=obj["name"],
            version=int(obj["version"]),
            path=obj["path"],
            content_hash=obj["hash"],
            producer=obj.get("producer", ""),
            created_at=obj.get("timestamp", ""),
            no_op=bool(obj.get("no_op", False)),
        )


@dataclass
class Checkpoint:
    """Resumable run state. ``round_state`` holds loop summaries, effort and directives."""

    run_id: str
    workflow: str
    step_index: int
    artifact_versions: dict[str, int] = field(default_factory=dict)
    round_state: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Checkpoint":
        try:
            return cls(
                run_id=str(data["run_id"]),
                workflow=str(data["workflow"]),
                step_index=int(data["step_index"]),
                artifact_versions={str(k): int(v) for k, v in data["artifact_versions"].items()},
                round_state=dict(data.get("round_state") or {}),
            )
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise CorruptCheckpoint(f"checkpoint is missing or has malformed fields: {exc}") from exc


RunState = Checkpoint


@dataclass(frozen=True)
class ContractEdge:
    producer_skill: str
    artifact_name: str
    consumer_skill: str


@dataclass(frozen=True)
class ContractIssue:
    step_index: int
    skill: str
    artifact_name: str

    def __str__(self) -> str:
        return f"step {self.step_index} ({self.skill}) consumes {self.artifact_name} with no upstream producer"


class ArtifactStore:
    """Versioned artifacts and run checkpoints for one project."""

    def __init__(self, project: Project | str | Path):
        self.project = project if isinstance(project, Project) else Project(project)
        self._mutex = threading.RLock()
        self._records: dict[str, list[ArtifactRecord]] = {}
        self._algorithm = HASH_ALGORITHM
        self._loaded_size = -1

    # -- manifest --------------------------------------------------------

    def _refresh(self) -> None:
        path = self.project.manifest_path
        size = path.stat().st_size if path.exists() else 0
        if size == self._loaded_size:
            return
        records, warnings = read_jsonl(path)
        for w in warnings:
            logger.warning(w)
        index: dict[str, list[ArtifactRecord]] = {}
        algorithm = HASH_ALGORITHM
        for obj in records:
            if "aris_manifest" in obj:
                algorithm = obj.get("hash", HASH_ALGORITHM)
                continue
            rec = ArtifactRecord.from_json(obj)
            index.setdefault(rec.logical_name, []).append(rec)
        for recs in index.values():
            recs.sort(key=lambda r: r.version)
        self._records = index
        self._algorithm = algorithm
        self._loaded_size = size

    def _ensure_header(self) -> None:
        path = self.project.manifest_path
        if not path.exists() or path.stat().st_size == 0:
            header = {"aris_manifest": MANIFEST_FORMAT, "hash": HASH_ALGORITHM}
            append_line(path, json.dumps(header, sort_keys=True))

    @property
    def hash_algorithm(self) -> str:
        with self._mutex:
            self._refresh()
            return self._algorithm

    # -- artifacts -------------------------------------------------------

    def put_artifact(
        self,
        logical_name: str,
        content: bytes | str,
        producer: str,
        suffix: str = ".md",
    ) -> ArtifactRecord:
        if not logical_name or not _NAME_RE.match(logical_name):
            raise ValueError(f"invalid logical artifact name {logical_name!r}")
        data = content.encode("utf-8") if isinstance(content, str) else bytes(content)
        with self._mutex, self.project.lock:
            self._refresh()
            self._ensure_header()
            history = self._records.get(logical_name, [])
            version = history[-1].version + 1 if history else 1
            target = self.project.artifacts_dir / logical_name / f"{version}{suffix}"
            content_hash = digest(data, self._algorithm)
            try:
                atomic_write(target, data)
            except OSError as exc:
                raise IoFailure(f"could not write {target}: {exc}") from exc
            record = ArtifactRecord(
                logical_name=logical_name,
                version=version,
                path=self.project.relpath(target),
                content_hash=content_hash,
                producer=producer,
                created_at=utcnow(),
                no_op=bool(history) and history[-1].content_hash == content_hash,
            )
            try:
                self._append_record(record)
            except OSError as exc:
                raise IoFailure(f"could not index {target}: {exc}") from exc
            self._refresh()
            return record

    def _append_record(self, record: ArtifactRecord) -> None:
        append_line(self.project.manifest_path, json.dumps(record.to_json(), sort_keys=True))

    def history(self, logical_name: str) -> list[ArtifactRecord]:
        with self._mutex:
            self._refresh()
            return list(self._records.get(logical_name, []))

    def names(self) -> list[str]:
        with self._mutex:
            self._refresh()
            return sorted(self._records)

    def exists(self, logical_name: str, version: int | None = None) -> bool:
        recs = self.history(logical_name)
        if version is None:
            return bool(recs)
        return any(r.version == version for r in recs)

    def record(self, logical_name: str, version: int | None = None) -> ArtifactRecord:
        recs = self.history(logical_name)
        if not recs:
            raise NotFound(f"no artifact named {logical_name!r}")
        if version is None:
            return recs[-1]
        for rec in recs:
            if rec.version == version:
                return rec
        raise VersionNotFound(f"{logical_name} has no version {version}")

    def get_artifact(self, logical_name: str, version: int | None = None) -> tuple[bytes, ArtifactRecord]:
        rec = self.record(logical_name, version)
        try:
            data = (self.project.root / rec.path).read_bytes()
        except OSError as exc:
            raise IoFailure(f"could not read {rec.path}: {exc}") from exc
        return data, rec

    def get_text(self, logical_name: str, version: int | None = None) -> str:
        return self.get_artifact(logical_name, version)[0].decode("utf-8")

    def path_of(self, logical_name: str, version: int | None = None) -> Path:
        return self.project.root / self.record(logical_name, version).path

    def latest_versions(self) -> dict[str, int]:
        with self._mutex:
            self._refresh()
            return {name: recs[-1].version for name, recs in self._records.items()}

    def verify(self) -> list[str]:
        """Return digest mismatches between the manifest and the files on disk."""
        problems = []
        with self._mutex:
            self._refresh()
            for recs in self._records.values():
                for rec in recs:
                    path = self.project.root / rec.path
                    if not path.exists():
                        problems.append(f"{rec.logical_name} v{rec.version}: file missing")
                    elif digest(path.read_bytes(), self._algorithm) != rec.content_hash:
                        problems.append(f"{rec.logical_name} v{rec.version}: digest mismatch")
        return problems

    def view(self, versions: Mapping[str, int]) -> "ArtifactView":
        return ArtifactView(self, dict(versions))

    # -- checkpoints -----------------------------------------------------

    def _checkpoint_path(self, run_id: str) -> Path:
        if not run_id or "/" in run_id or run_id.startswith("."):
            raise ValueError(f"invalid run id {run_id!r}")
        return self.project.checkpoints_dir / f"{run_id}.json"

    def save_checkpoint(self, state: Checkpoint) -> Checkpoint:
        for name, version in state.artifact_versions.items():
            if not self.exists(name, version):
                raise VersionNotFound(f"checkpoint references {name} v{version}, which does not exist")
        payload = json.dumps(state.to_dict(), sort_keys=True, indent=2).encode("utf-8")
        with self._mutex, self.project.lock:
            try:
                atomic_write(self._checkpoint_path(state.run_id), payload)
            except OSError as exc:
                raise IoFailure(f"could not write checkpoint: {exc}") from exc
        return Checkpoint.from_dict(json.loads(payload))

    def resume(self, run_id: str) -> Checkpoint:
        path = self._checkpoint_path(run_id)
        if not path.exists():
            raise UnknownRun(f"no checkpoint for run {run_id!r}")
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CorruptCheckpoint(f"checkpoint {path.name} is unreadable: {exc}") from exc
        if not isinstance(data, dict):
            raise CorruptCheckpoint(f"checkpoint {path.name} is not an object")
        state = Checkpoint.from_dict(data)
        for name, version in state.artifact_versions.items():
            if not self.exists(name, version):
                raise CorruptCheckpoint(f"checkpoint pins {name} v{version}, which is not in the manifest")
        return state

    def runs(self) -> list[str]:
        d = self.project.checkpoints_dir
        if not d.exists():
            return []
        return sorted(p.stem for p in d.glob("*.json"))

    def fork_run_id(self, run_id: str) -> str:
        """Id for a resumed attempt of ``run_id``: ``<base>.r<n>``."""
        base = re.sub(r"\.r\d+$", "", run_id)
        pattern = re.compile(rf"^{re.escape(base)}\.r(\d+)$")
        attempts = [int(m.group(1)) for r in self.runs() if (m := pattern.match(r))]
        return f"{base}.r{max(attempts, default=0) + 1}"


class ArtifactView:
    """Read-only view pinned to specific versions (e.g. from a checkpoint)."""

    def __init__(self, store: ArtifactStore, versions: dict[str, int]):
        self._store = store
        self.versions = versions

    def get(self, logical_name: str) -> bytes:
        if logical_name not in self.versions:
            raise NotFound(f"{logical_name!r} is not pinned in this view")
        return self._store.get_artifact(logical_name, self.versions[logical_name])[0]

    def path(self, logical_name: str) -> Path:
        if logical_name not in self.versions:
            raise NotFound(f"{logical_name!r} is not pinned in this view")
        return self._store.path_of(logical_name, self.versions[logical_name])


def contract_edges(workflow_def: Any) -> list[ContractEdge]:
    """Producer -> artifact -> consumer edges implied by step order."""
    producers: dict[str, str] = {}
    edges = []
    for step in workflow_def.steps:
        for name in list(step.consumes) + list(getattr(step, "optional_consumes", ())):
            if name in producers:
                edges.append(ContractEdge(producers[name], name, step.skill))
        for name in step.produces:
            producers[name] = step.skill
    return edges


def validate_contracts(workflow_def: Any, available: Iterable[str] = ()) -> list[ContractIssue]:
    """Every consumed artifact needs an earlier producer or an externally supplied input.

    A missing artifact is reported once, at its first consumer.
    """
    have = set(available)
    reported: set[str] = set()
    issues = []
    for index, step in enumerate(workflow_def.steps):
        for name in step.consumes:
            if name not in have and name not in reported:
                issues.append(ContractIssue(index, step.skill, name))
                reported.add(name)
        have.update(step.produces)
    return issues
