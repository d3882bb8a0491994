"""Helpers shared by the audit stages."""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Any, Sequence

import yaml

from .._assets import asset_text
from ..bridges import BridgeHub, Message
from ..errors import UnparseableFindings
from ..store import atomic_write


def prompt(name: str) -> str:
    return asset_text("prompts", name)


def fenced_blocks(text: str, tag: str) -> list[str]:
    return re.findall(rf"```{re.escape(tag)}[ \t]*\n(.*?)```", text, re.S)


def parse_block(text: str, tag: str, required: bool = True) -> Any:
    """YAML payload of the last ``tag`` block, or None when absent and optional."""
    blocks = fenced_blocks(text, tag)
    if not blocks:
        if required:
            raise UnparseableFindings(f"reply has no fenced {tag} block")
        return None
    try:
        return yaml.safe_load(blocks[-1])
    except yaml.YAMLError as exc:
        raise UnparseableFindings(f"{tag} block is not valid YAML: {exc}") from exc


def ask_fresh(hub: BridgeHub, bridge_id: str, system: str, user: str, run_id: str | None = None) -> str:
    """One reviewer call on a new, empty conversation."""
    exchange = hub.send(bridge_id, [Message("system", system), Message("user", user)], run_id)
    return exchange.reply


def path_list(paths: Sequence[str]) -> str:
    return "\n".join(f"- {p}" for p in paths)


def write_pair(out_dir: Path, md_name: str, markdown: str, json_name: str, records: Any) -> tuple[Path, Path]:
    out_dir = Path(out_dir)
    md_path, json_path = out_dir / md_name, out_dir / json_name
    atomic_write(md_path, markdown.encode("utf-8"))
    atomic_write(json_path, (json.dumps(records, indent=2, sort_keys=True) + "\n").encode("utf-8"))
    return md_path, json_path


def md_cell(text: Any) -> str:
    return str(text if text is not None else "").replace("|", "\\|").replace("\n", " ")
