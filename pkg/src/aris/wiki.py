"""Per-project research wiki: a typed knowledge graph stored as Markdown pages.

Pages live at ``.aris/wiki/<entity_type>/<slug>-<hex>.md`` (i.e. at
``.aris/wiki/<node_id>.md``), edges in ``.aris/wiki/edges.jsonl``.
Recency is a logical clock (``seq``) rather than wall time so that query packs
are reproducible.
"""

from __future__ import annotations

import hashlib
import json
import re
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from . import frontmatter
from .errors import (
    DuplicateEdge,
    DuplicateId,
    InvalidStatus,
    NotAClaim,
    UnknownEndpoint,
    UnknownNode,
    UnknownRelation,
)
from .store import Project, append_line, atomic_write, read_jsonl

ENTITY_TYPES = ("paper", "idea", "experiment", "claim")

STATUSES = {
    "paper": ("ingested",),
    "idea": ("proposed", "active", "rejected"),
    "experiment": ("planned", "running", "done", "failed"),
    "claim": ("untested", "supported", "partially_supported", "invalidated"),
}
DEFAULT_STATUS = {"paper": "ingested", "idea": "proposed", "experiment": "planned", "claim": "untested"}

RELATIONS = (
    "extends",
    "contradicts",
    "addresses_gap",
    "inspired_by",
    "tested_by",
    "supports",
    "invalidates",
    "supersedes",
)

CLAIM_VERDICTS = ("supported", "partially_supported", "invalidated")

QUERY_PACK_CAP = 8000
MAX_ENTRY_CHARS = 300
_HISTORY_HEADING = "## Status history"


@dataclass
class WikiNode:
    entity_type: str
    title: str
    body: str = ""
    status: str = ""
    node_id: str = ""
    created_seq: int = 0
    updated_seq: int = 0
    tombstoned: bool = False


@dataclass(frozen=True)
class WikiEdge:
    src: str
    dst: str
    relation: str
    seq: int = field(default=0, compare=False)


@dataclass
class QueryPack:
    text: str
    char_count: int
    sections: dict[str, list[str]]
    omitted: int = 0


def slugify(title: str, max_len: int = 40) -> str:
    ascii_title = unicodedata.normalize("NFKD", title).encode("ascii", "ignore").decode()
    slug = re.sub(r"[^a-z0-9]+", "-", ascii_title.lower()).strip("-")
    return slug[:max_len].strip("-") or "untitled"


class ResearchWiki:
    def __init__(self, project: Project | str | Path, persist: bool = True):
        self.project = project if isinstance(project, Project) else Project(project)
        self.root = self.project.wiki_dir
        # persist=False keeps the graph in memory only (scratch analysis, fuzzing)
        self.persist = persist
        self.nodes: dict[str, WikiNode] = {}
        self.edges: list[WikiEdge] = []
        self._edge_keys: set[tuple[str, str, str]] = set()
        self._seq = 0
        if persist:
            self.load()

    # -- persistence -----------------------------------------------------

    @property
    def edges_path(self) -> Path:
        return self.root / "edges.jsonl"

    def page_path(self, node_id: str) -> Path:
        return self.root / f"{node_id}.md"

    def load(self) -> None:
        self.nodes.clear()
        self.edges.clear()
        self._edge_keys.clear()
        self._seq = 0
        for etype in ENTITY_TYPES:
            d = self.root / etype
            if not d.is_dir():
                continue
            for page in sorted(d.glob("*.md")):
                node = self._read_page(page.read_text(encoding="utf-8"))
                self.nodes[node.node_id] = node
                self._seq = max(self._seq, node.created_seq, node.updated_seq)
        records, _ = read_jsonl(self.edges_path)
        for obj in records:
            edge = WikiEdge(obj["src"], obj["dst"], obj["relation"], int(obj.get("seq", 0)))
            self.edges.append(edge)
            self._edge_keys.add((edge.src, edge.dst, edge.relation))
            self._seq = max(self._seq, edge.seq)

    @staticmethod
    def _read_page(text: str) -> WikiNode:
        meta, body = frontmatter.parse(text)
        return WikiNode(
            entity_type=str(meta["entity_type"]),
            title=str(meta.get("title", "")),
            body=body,
            status=str(meta["status"]),
            node_id=str(meta["node_id"]),
            created_seq=int(meta.get("created_seq", 0)),
            updated_seq=int(meta.get("updated_seq", 0)),
            tombstoned=bool(meta.get("tombstoned", False)),
        )

    def _write_page(self, node: WikiNode) -> None:
        meta = {
            "node_id": node.node_id,
            "entity_type": node.entity_type,
            "status": node.status,
            "title": node.title,
            "created_seq": node.created_seq,
            "updated_seq": node.updated_seq,
        }
        if node.tombstoned:
            meta["tombstoned"] = True
        if not self.persist:
            return
        with self.project.lock:
            atomic_write(self.page_path(node.node_id), frontmatter.dump(meta, node.body).encode("utf-8"))

    def _tick(self) -> int:
        self._seq += 1
        return self._seq

    # -- mutation --------------------------------------------------------

    def _new_id(self, entity_type: str, title: str, seq: int) -> str:
        nonce = 0
        while True:
            h = hashlib.sha256(f"{entity_type}\0{title}\0{seq}\0{nonce}".encode()).hexdigest()[:6]
            node_id = f"{entity_type}/{slugify(title)}-{h}"
            if node_id not in self.nodes:
                return node_id
            nonce += 1

    def add_node(self, node: WikiNode) -> str:
        if node.entity_type not in ENTITY_TYPES:
            raise InvalidStatus(f"unknown entity type {node.entity_type!r}")
        status = node.status or DEFAULT_STATUS[node.entity_type]
        if status not in STATUSES[node.entity_type]:
            raise InvalidStatus(f"status {status!r} is not valid for {node.entity_type}")
        seq = self._tick()
        if node.node_id:
            if node.node_id in self.nodes:
                raise DuplicateId(f"node id {node.node_id!r} already exists")
            if not node.node_id.startswith(f"{node.entity_type}/"):
                raise ValueError(f"node id {node.node_id!r} must start with '{node.entity_type}/'")
            node_id = node.node_id
        else:
            node_id = self._new_id(node.entity_type, node.title, seq)
        stored = WikiNode(
            entity_type=node.entity_type,
            title=node.title,
            body=node.body,
            status=status,
            node_id=node_id,
            created_seq=seq,
            updated_seq=seq,
        )
        self._write_page(stored)
        self.nodes[node_id] = stored
        return node_id

    def add_edge(self, edge: WikiEdge) -> None:
        if edge.relation not in RELATIONS:
            raise UnknownRelation(f"{edge.relation!r} is not one of {', '.join(RELATIONS)}")
        for endpoint in (edge.src, edge.dst):
            if endpoint not in self.nodes:
                raise UnknownEndpoint(f"no node {endpoint!r}")
        key = (edge.src, edge.dst, edge.relation)
        if key in self._edge_keys:
            raise DuplicateEdge(f"edge {edge.src} -{edge.relation}-> {edge.dst} already exists")
        stored = WikiEdge(edge.src, edge.dst, edge.relation, self._tick())
        if self.persist:
            with self.project.lock:
                append_line(
                    self.edges_path,
                    json.dumps({"src": stored.src, "dst": stored.dst, "relation": stored.relation, "seq": stored.seq}),
                )
        self.edges.append(stored)
        self._edge_keys.add(key)

    def set_status(self, node_id: str, status: str) -> WikiNode:
        node = self.get(node_id)
        if status not in STATUSES[node.entity_type]:
            raise InvalidStatus(f"status {status!r} is not valid for {node.entity_type}")
        if status != node.status:
            node.body = _append_history(node.body, node.status, status, self._history_count(node) + 1)
            node.status = status
        node.updated_seq = self._tick()
        self._write_page(node)
        return node

    def update_claim_status(self, claim_id: str, verdict: str) -> WikiNode:
        node = self.get(claim_id)
        if node.entity_type != "claim":
            raise NotAClaim(f"{claim_id} is a {node.entity_type}, not a claim")
        if verdict not in CLAIM_VERDICTS:
            raise InvalidStatus(f"verdict must be one of {CLAIM_VERDICTS}, got {verdict!r}")
        prior = node.status
        node.body = _append_history(node.body, prior, verdict, self._history_count(node) + 1)
        node.status = verdict
        node.updated_seq = self._tick()
        self._write_page(node)
        return node

    def tombstone(self, node_id: str) -> WikiNode:
        node = self.get(node_id)
        node.tombstoned = True
        node.updated_seq = self._tick()
        self._write_page(node)
        return node

    # -- queries ---------------------------------------------------------

    def get(self, node_id: str) -> WikiNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no node {node_id!r}") from None

    def find(self, entity_type: str | None = None, status: str | None = None) -> list[WikiNode]:
        return [
            n
            for n in self.nodes.values()
            if not n.tombstoned
            and (entity_type is None or n.entity_type == entity_type)
            and (status is None or n.status == status)
        ]

    def find_by_title(self, entity_type: str, title: str) -> WikiNode | None:
        slug = slugify(title)
        for node in self.find(entity_type):
            if slugify(node.title) == slug:
                return node
        return None

    def history(self, node_id: str) -> list[str]:
        return _history_lines(self.get(node_id).body)

    def _history_count(self, node: WikiNode) -> int:
        return len(_history_lines(node.body))

    def banlist(self) -> set[str]:
        return set(self._banned_with_recency())

    def _banned_with_recency(self) -> dict[str, int]:
        banned: dict[str, int] = {}
        for node in self.nodes.values():
            if node.entity_type == "idea" and node.status == "rejected":
                banned[node.node_id] = node.updated_seq
        for edge in self.edges:
            if edge.relation != "invalidates":
                continue
            src, dst = self.nodes.get(edge.src), self.nodes.get(edge.dst)
            if src and dst and src.entity_type == "claim" and dst.entity_type == "idea":
                banned[dst.node_id] = max(banned.get(dst.node_id, 0), edge.seq)
        return banned

    def query_pack_entries(self) -> list[tuple[str, str]]:
        """All candidate entries as ``(section, line)`` in priority order."""
        entries: list[tuple[str, str]] = []
        gap_seq: dict[str, int] = {}
        for edge in self.edges:
            if edge.relation == "addresses_gap" and edge.dst in self.nodes:
                gap_seq[edge.dst] = max(gap_seq.get(edge.dst, 0), edge.seq)
        for node_id, _ in sorted(gap_seq.items(), key=lambda kv: (-kv[1], kv[0])):
            entries.append(("gaps", _entry(self.nodes[node_id])))
        banned = self._banned_with_recency()
        for node_id, _ in sorted(banned.items(), key=lambda kv: (-kv[1], kv[0])):
            entries.append(("rejected_ideas", _entry(self.nodes[node_id])))
        claims = [n for n in self.find("claim") if n.status == "supported"]
        for node in sorted(claims, key=lambda n: (-n.updated_seq, n.node_id)):
            entries.append(("validated_claims", _entry(node)))
        for node in sorted(self.find("experiment"), key=lambda n: (-n.updated_seq, n.node_id)):
            entries.append(("recent_experiments", _entry(node)))
        return entries

    def build_query_pack(self, cap: int = QUERY_PACK_CAP) -> QueryPack:
        entries = self.query_pack_entries()
        keep = _largest_fitting_prefix(entries, cap)
        text = render_query_pack(entries[:keep], omitted=len(entries) - keep)
        sections: dict[str, list[str]] = {name: [] for name in PACK_SECTIONS}
        for section, line in entries[:keep]:
            sections[section].append(line)
        return QueryPack(text=text, char_count=len(text), sections=sections, omitted=len(entries) - keep)

    def write_query_pack(self, cap: int = QUERY_PACK_CAP) -> QueryPack:
        pack = self.build_query_pack(cap)
        with self.project.lock:
            atomic_write(self.root / "query_pack.md", pack.text.encode("utf-8"))
        return pack


PACK_SECTIONS = ("gaps", "rejected_ideas", "validated_claims", "recent_experiments")
_SECTION_TITLES = {
    "gaps": "Open gaps",
    "rejected_ideas": "Rejected ideas (banlist)",
    "validated_claims": "Validated claims",
    "recent_experiments": "Recent experiments",
}
_PACK_HEADER = "# Query pack\n"
_EMPTY = "- (none)\n"


def _entry(node: WikiNode) -> str:
    title = " ".join(node.title.split())
    line = f"- `{node.node_id}` [{node.status}] {title}"
    if len(line) > MAX_ENTRY_CHARS:
        line = line[: MAX_ENTRY_CHARS - 1] + "…"
    return line + "\n"


def _section_header(name: str) -> str:
    return f"\n## {_SECTION_TITLES[name]}\n"


def _trailer(omitted: int) -> str:
    return f"\n_{omitted} lower-priority entries omitted._\n" if omitted else ""


def render_query_pack(entries: Iterable[tuple[str, str]], omitted: int = 0) -> str:
    grouped: dict[str, list[str]] = {name: [] for name in PACK_SECTIONS}
    for section, line in entries:
        grouped[section].append(line)
    parts = [_PACK_HEADER]
    for name in PACK_SECTIONS:
        parts.append(_section_header(name))
        parts.extend(grouped[name] or [_EMPTY])
    parts.append(_trailer(omitted))
    return "".join(parts)


def _largest_fitting_prefix(entries: list[tuple[str, str]], cap: int) -> int:
    """Largest k such that rendering ``entries[:k]`` fits in ``cap`` characters.

    Computed incrementally; equivalent to rendering and measuring each prefix.
    """
    n = len(entries)
    base = len(_PACK_HEADER) + sum(len(_section_header(s)) for s in PACK_SECTIONS)
    used = {s: 0 for s in PACK_SECTIONS}
    body = 0
    best = 0
    for k in range(n + 1):
        if k:
            section, line = entries[k - 1]
            used[section] += 1
            body += len(line)
        empties = sum(1 for s in PACK_SECTIONS if used[s] == 0)
        total = base + body + empties * len(_EMPTY) + len(_trailer(n - k))
        if total <= cap:
            best = k
    return best


def _history_lines(body: str) -> list[str]:
    if _HISTORY_HEADING not in body:
        return []
    tail = body.split(_HISTORY_HEADING, 1)[1]
    return [line for line in tail.splitlines() if line.startswith("- update ")]


def _append_history(body: str, old: str, new: str, n: int) -> str:
    line = f"- update {n}: {old} -> {new}\n"
    if _HISTORY_HEADING not in body:
        if body and not body.endswith("\n"):
            body += "\n"
        body += f"\n{_HISTORY_HEADING}\n"
    return body + line


def build_query_pack(wiki: ResearchWiki) -> QueryPack:
    return wiki.build_query_pack()


def banlist(wiki: ResearchWiki) -> set[str]:
    return wiki.banlist()
