"""Label width estimation from per-class advances (no system font metrics)."""

from __future__ import annotations

from dataclasses import dataclass, field

# East Asian ranges rendered at the wide advance
DEFAULT_WIDE_RANGES: tuple[tuple[int, int], ...] = (
    (0x3040, 0x309F),  # Hiragana
    (0x30A0, 0x30FF),  # Katakana
    (0x3400, 0x4DBF),  # CJK Extension A
    (0x4E00, 0x9FFF),  # CJK Unified Ideographs
    (0xAC00, 0xD7AF),  # Hangul syllables
    (0xFF01, 0xFF60),  # full-width forms
    (0xFFE0, 0xFFE6),  # full-width signs
)


@dataclass(frozen=True)
class FontConfig:
    family: str = "Helvetica, Arial, sans-serif"
    size: float = 12.0
    narrow_advance: float = 7.0
    wide_advance: float = 14.0
    line_height: float = 16.0
    wide_ranges: tuple[tuple[int, int], ...] = field(default=DEFAULT_WIDE_RANGES)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "size": self.size,
            "advances": {"narrow": self.narrow_advance, "wide": self.wide_advance},
            "line_height": self.line_height,
        }


def is_wide(ch: str, font: FontConfig) -> bool:
    cp = ord(ch)
    return any(lo <= cp <= hi for lo, hi in font.wide_ranges)


def char_advance(ch: str, font: FontConfig) -> float:
    return font.wide_advance if is_wide(ch, font) else font.narrow_advance


def estimate_text_width(line: str, font: FontConfig | None = None) -> float:
    font = font or FontConfig()
    return sum(char_advance(ch, font) for ch in line)
