"""Number extraction and the local numeric comparison used by Stage 3 and editing pass 5."""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from typing import Any, Iterable, Mapping

NUMERIC_STATUSES = ("exact_match", "rounding_ok", "number_mismatch")

CLAIM_KEYWORDS = (
    "accuracy", "acc", "score", "f1", "bleu", "rouge", "auc", "loss", "error", "perplexity",
    "precision", "recall", "improves", "improved", "improvement", "achieves", "achieved",
    "reaches", "reached", "outperforms", "gain", "drop", "increase", "increased", "decrease",
    "reduces", "reduced", "rate", "speedup", "mean", "average",
)

_NUMBER = re.compile(r"(?<![\w.])([-+−]?\d+(?:\.\d+)?)(\s?%)?(?![\w]|\.\d)")
_REFERENCE_WORD = re.compile(r"(?:table|figure|fig\.|section|sec\.|eq\.|equation|appendix|theorem|lemma|step|round|seed)\s*$", re.I)
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+(?=[A-Z\\])|\n\s*\n")


def to_decimal(value: Any) -> Decimal:
    """Exact decimal for a display string or the shortest repr of a float."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(value, float):
        return Decimal(repr(value))
    text = str(value).strip().replace("−", "-").replace(",", "")
    try:
        return Decimal(text)
    except InvalidOperation:
        raise ValueError(f"not a number: {value!r}") from None


def display_precision(display: str) -> int:
    text = str(display).strip()
    return len(text.split(".", 1)[1]) if "." in text else 0


def round_half_even(value: Any, precision: int) -> Decimal:
    return to_decimal(value).quantize(Decimal(1).scaleb(-precision), rounding=ROUND_HALF_EVEN)


def numeric_compare(display_value: str, display_precision_: int | None, evidence_value: Any) -> str:
    """exact_match, rounding_ok or number_mismatch for a displayed number."""
    shown = to_decimal(display_value)
    precision = display_precision(str(display_value)) if display_precision_ is None else display_precision_
    evidence = to_decimal(evidence_value)
    if not (shown.is_finite() and evidence.is_finite()):
        raise ValueError("both values must be finite")
    if evidence == shown:
        return "exact_match"
    if round_half_even(evidence, precision) == shown:
        return "rounding_ok"
    return "number_mismatch"


def delta_compare(display_delta: str, a: Any, b: Any, precision: int | None = None) -> str:
    """Check a stated difference against ``a - b`` recomputed from evidence."""
    return numeric_compare(display_delta, precision, to_decimal(a) - to_decimal(b))


@dataclass(frozen=True)
class NumberMention:
    text: str  # number as written, sign normalized, no percent sign
    precision: int
    percent: bool
    sentence: str
    position: int  # offset of the number inside the sentence
    index: int  # order of appearance in the document


def split_sentences(text: str) -> list[str]:
    return [s.strip() for s in _SENTENCE_SPLIT.split(text) if s and s.strip()]


def _word_re(word: str) -> re.Pattern:
    return re.compile(rf"(?<![\w]){re.escape(word)}(?![\w])", re.I)


_KEYWORD_RES = [_word_re(k) for k in CLAIM_KEYWORDS]


def has_claim_keyword(sentence: str) -> bool:
    return any(r.search(sentence) for r in _KEYWORD_RES)


def extract_numbers(text: str, keys: Iterable[str] = ()) -> list[NumberMention]:
    """Decimal literals in sentences that look like quantitative claims.

    A sentence qualifies when it contains a claim keyword or names one of
    ``keys``. Numbers right after words like "Table" or "Section" are skipped.
    """
    key_res = [_word_re(k) for k in keys]
    out: list[NumberMention] = []
    for sentence in split_sentences(text):
        if not (has_claim_keyword(sentence) or any(r.search(sentence) for r in key_res)):
            continue
        for m in _NUMBER.finditer(sentence):
            if _REFERENCE_WORD.search(sentence[: m.start()]):
                continue
            raw = m.group(1).replace("−", "-")
            out.append(NumberMention(raw, display_precision(raw), bool(m.group(2)), sentence, m.start(), len(out)))
    return out


# -- raw evidence ----------------------------------------------------------


def flatten_json(data: Any, prefix: str = "") -> dict[str, Decimal]:
    out: dict[str, Decimal] = {}
    if isinstance(data, Mapping):
        for k, v in data.items():
            out.update(flatten_json(v, f"{prefix}.{k}" if prefix else str(k)))
    elif isinstance(data, list):
        for i, v in enumerate(data):
            out.update(flatten_json(v, f"{prefix}.{i}" if prefix else str(i)))
    elif isinstance(data, (int, float)) and not isinstance(data, bool):
        out[prefix] = to_decimal(data)
    return out


def flatten_csv(text: str) -> dict[str, Decimal]:
    """``<row label>.<column>`` for every numeric cell; the first column labels rows."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return {}
    header, out = rows[0], {}
    for row in rows[1:]:
        if not row:
            continue
        label = row[0].strip()
        for col, cell in zip(header[1:], row[1:]):
            try:
                out[f"{label}.{col.strip()}"] = to_decimal(cell)
            except ValueError:
                continue
    return out


def load_raw_values(files: Mapping[str, str]) -> dict[str, Decimal]:
    """Flatten raw result files (name -> text). Keys are not prefixed by file name."""
    out: dict[str, Decimal] = {}
    for name in sorted(files):
        text = files[name]
        if name.endswith(".csv"):
            out.update(flatten_csv(text))
        else:
            try:
                out.update(flatten_json(json.loads(text)))
            except ValueError:
                continue
    return out


@dataclass(frozen=True)
class KeyMatch:
    key: str
    value: Decimal
    components: int
    distance: int


def _components(key: str) -> list[str]:
    return [c for c in re.split(r"[.]", key) if c and not c.isdigit()]


def match_keys(sentence: str, position: int, raw: Mapping[str, Decimal]) -> list[KeyMatch]:
    """Raw keys whose every component appears as a whole word, most specific and nearest first."""
    matches = []
    for key, value in raw.items():
        comps = _components(key)
        if not comps:
            continue
        spots = []
        for comp in comps:
            found = [m.start() for m in _word_re(comp).finditer(sentence)]
            if not found:
                break
            spots.append(min(abs(f - position) for f in found))
        else:
            matches.append(KeyMatch(key, value, len(comps), min(spots)))
    matches.sort(key=lambda k: (-k.components, k.distance, k.key))
    return matches


def classify_mention(mention: NumberMention, raw: Mapping[str, Decimal]) -> tuple[str, KeyMatch | None, Decimal | None]:
    """Local status for one mention: a numeric status or missing_evidence."""
    matches = match_keys(mention.sentence, mention.position, raw)
    if not matches:
        return "missing_evidence", None, None
    best = matches[0]
    candidates = [best.value]
    if mention.percent:
        candidates.append(best.value * 100)
    ranked = []
    for value in candidates:
        status = numeric_compare(mention.text, mention.precision, value)
        ranked.append((NUMERIC_STATUSES.index(status), status, value))
    ranked.sort(key=lambda r: r[0])
    _, status, value = ranked[0]
    return status, best, value
