"""Ground-truth text hygiene for Syriac: diacritic stripping, whitespace
normalization, and charset validation.

Normalized ground truth is a plain ``str``: NFC form, no combining marks,
no control characters, single spaces, no surrounding whitespace. All
downstream metrics count Unicode codepoints of this form.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "SYRIAC_LETTERS",
    "SYRIAC_ALPHABET",
    "DEFAULT_PUNCTUATION",
    "Charset",
    "EmptyAfterNormalization",
    "strip_diacritics",
    "normalize_text",
    "validate_charset",
    "read_ground_truth",
    "write_ground_truth",
]

# Letters live in U+0710..U+072F (U+0711 is a combining mark); the marks
# stripped from ground truth are U+0711 and U+0730..U+074A. The canonical
# 22-letter alphabet excludes positional/regional variant codepoints.
SYRIAC_BLOCK = range(0x0700, 0x0750)
SYRIAC_LETTERS = frozenset(
    cp for cp in range(0x0710, 0x0730) if cp != 0x0711
)
SYRIAC_ALPHABET = frozenset(
    [0x0710, 0x0712, 0x0713, 0x0715, 0x0717, 0x0718, 0x0719, 0x071A,
     0x071B, 0x071D, 0x071F, 0x0720, 0x0721, 0x0722, 0x0723, 0x0725,
     0x0726, 0x0728, 0x0729, 0x072A, 0x072B, 0x072C]
)
SYRIAC_MARKS = frozenset({0x0711}) | frozenset(range(0x0730, 0x074B))

DEFAULT_PUNCTUATION = frozenset({".", ":", "܀", "܁", "܂"})


class EmptyAfterNormalization(ValueError):
    """Raised when normalization leaves no text at all."""


@dataclass(frozen=True)
class Charset:
    """Set of codepoints a ground-truth line may contain."""

    punctuation: frozenset[str] = DEFAULT_PUNCTUATION
    allowed: frozenset[str] = field(init=False)

    def __post_init__(self) -> None:
        allowed = {chr(cp) for cp in SYRIAC_LETTERS} | {" "} | set(self.punctuation)
        bad = {c for c in allowed if ord(c) in SYRIAC_MARKS}
        if bad:
            raise ValueError(f"charset may not contain combining marks: {bad!r}")
        object.__setattr__(self, "allowed", frozenset(allowed))

    def __contains__(self, char: str) -> bool:
        return char in self.allowed


def strip_diacritics(s: str) -> str:
    """Drop Syriac vowel/point marks, keeping base letters in order.

    Removes U+0711 and U+0730..U+074A unconditionally, plus any other
    combining mark (category Mn) whose base letter is Syriac.
    """
    out: list[str] = []
    last_base = ""
    for ch in s:
        cp = ord(ch)
        if cp in SYRIAC_MARKS:
            continue
        if (
            unicodedata.category(ch) == "Mn"
            and last_base
            and ord(last_base) in SYRIAC_BLOCK
        ):
            continue
        if unicodedata.category(ch) != "Mn":
            last_base = ch
        out.append(ch)
    return "".join(out)


def normalize_text(s: str) -> str:
    """Canonicalize a ground-truth line.

    NFC-normalizes, strips diacritics, removes control characters, trims
    and collapses whitespace runs to single spaces. Control characters are
    dropped before the whitespace pass so their removal can never leave a
    double space behind.
    """
    s = unicodedata.normalize("NFC", s)
    s = strip_diacritics(s)
    s = "".join(
        ch for ch in s if ch.isspace() or unicodedata.category(ch)[0] != "C"
    )
    s = " ".join(s.split())
    if not s:
        raise EmptyAfterNormalization("no text left after normalization")
    return s


def validate_charset(text: str, charset: Charset | None = None) -> list[tuple[int, str]]:
    """Return (position, codepoint) pairs not allowed by the charset.

    An empty list means the text is valid. Violations are data for the
    curation workflow, not errors.
    """
    cs = charset if charset is not None else Charset()
    return [(i, ch) for i, ch in enumerate(text) if ch not in cs]


def read_ground_truth(path: Path | str) -> str:
    """Read a one-line ``.gt.txt`` file and normalize it."""
    raw = Path(path).read_text(encoding="utf-8")
    return normalize_text(raw)


def write_ground_truth(path: Path | str, text: str) -> None:
    """Write ground truth as exactly one LF-terminated UTF-8 line."""
    normalized = normalize_text(text)
    Path(path).write_text(normalized + "\n", encoding="utf-8")
