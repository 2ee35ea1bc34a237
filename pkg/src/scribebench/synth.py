"""Deterministic synthetic line images with known glyph geometry.

The default atlas maps the 22 Syriac base letters onto box-drawn bitmaps
built from a vertical spine plus horizontal bar segments. The shapes are
deliberately synthetic: 4 px strokes survive a k=3 box blur at T=127,
and glyphs never touch, which is what the prototype recognizer needs.
Lines render right-to-left. Everything is seeded and bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import Raster, box_blur
from .textnorm import SYRIAC_ALPHABET, normalize_text, write_ground_truth

__all__ = [
    "MissingGlyph",
    "GlyphAtlas",
    "RenderedLine",
    "default_atlas",
    "render_line",
    "degrade",
    "word_corrupt",
    "random_sentences",
    "write_corpus",
]

GLYPH_W = 24
GLYPH_H = 32
BAR_THICKNESS = 4
LINE_MARGIN = 8


class MissingGlyph(KeyError):
    """A codepoint in the text has no bitmap in the atlas."""


@dataclass(frozen=True)
class GlyphAtlas:
    """Codepoint-to-bitmap map with spacing rules.

    Bitmaps are boolean ink masks (True = ink). ``inter_word_gap`` must
    exceed ``inter_glyph_gap`` so the space-gap threshold is learnable.
    """

    glyphs: dict[str, np.ndarray]
    inter_glyph_gap: int = 4
    inter_word_gap: int = 16
    baseline: int = GLYPH_H

    def __post_init__(self) -> None:
        if not self.glyphs:
            raise ValueError("atlas needs at least one glyph")
        for cp, bitmap in self.glyphs.items():
            if bitmap.size == 0:
                raise ValueError(f"empty bitmap for {cp!r}")
        if self.inter_glyph_gap < 1:
            raise ValueError("inter_glyph_gap must be >= 1")
        if self.inter_word_gap <= self.inter_glyph_gap:
            raise ValueError("inter_word_gap must exceed inter_glyph_gap")

    @property
    def codepoints(self) -> list[str]:
        return sorted(self.glyphs)


@dataclass(frozen=True)
class RenderedLine:
    """A rendered line image with its text and exact glyph rectangles.

    ``glyph_boxes`` holds (codepoint, (x, y, w, h)) in emission order,
    which for RTL text runs from the right edge leftward.
    """

    image: Raster
    text: str
    glyph_boxes: tuple[tuple[str, tuple[int, int, int, int]], ...]


def _segment_glyph(bars: int) -> np.ndarray:
    """Box-drawn glyph: full-height left spine plus up to five bars.

    ``bars`` is a 5-bit selector; every bar attaches to the spine so each
    glyph is one connected component.
    """
    g = np.zeros((GLYPH_H, GLYPH_W), dtype=bool)
    g[:, :BAR_THICKNESS] = True
    slot_pitch = (GLYPH_H - BAR_THICKNESS) // 4  # 7 px: 4 px bar + 3 px gap
    for slot in range(5):
        if bars & (1 << slot):
            y0 = slot * slot_pitch
            g[y0 : y0 + BAR_THICKNESS, :] = True
    return g


def default_atlas(inter_glyph_gap: int = 4, inter_word_gap: int = 16) -> GlyphAtlas:
    """Atlas covering the 22 Syriac base letters with distinct shapes."""
    glyphs = {}
    for i, cp in enumerate(sorted(SYRIAC_ALPHABET)):
        glyphs[chr(cp)] = _segment_glyph(i + 1)
    return GlyphAtlas(
        glyphs=glyphs,
        inter_glyph_gap=inter_glyph_gap,
        inter_word_gap=inter_word_gap,
    )


def render_line(text: str, atlas: GlyphAtlas, margin: int = LINE_MARGIN) -> RenderedLine:
    """Render normalized text right-to-left on a white background.

    The first codepoint lands at the right margin; spaces advance by the
    inter-word gap instead of the inter-glyph gap. Glyph rectangles are
    recorded exactly as drawn.
    """
    for cp in text:
        if cp != " " and cp not in atlas.glyphs:
            raise MissingGlyph(cp)

    entries = []  # (codepoint, bitmap, gap that follows it)
    for idx, cp in enumerate(text):
        if cp == " ":
            continue
        gap = 0
        if idx + 1 < len(text):
            gap = atlas.inter_word_gap if text[idx + 1] == " " else atlas.inter_glyph_gap
        entries.append((cp, atlas.glyphs[cp], gap))

    max_h = max(b.shape[0] for _, b, _ in entries) if entries else 1
    total_w = 2 * margin + sum(b.shape[1] for _, b, _ in entries)
    total_w += sum(gap for _, _, gap in entries[:-1]) if len(entries) > 1 else 0
    total_h = max_h + 2 * margin

    canvas = np.full((total_h, total_w), 255, dtype=np.uint8)
    boxes = []
    x_right = total_w - margin
    baseline = margin + max_h
    for cp, bitmap, gap in entries:
        gh, gw = bitmap.shape
        x0 = x_right - gw
        y0 = baseline - gh
        canvas[y0 : y0 + gh, x0 : x0 + gw][bitmap] = 0
        boxes.append((cp, (x0, y0, gw, gh)))
        x_right = x0 - gap
    return RenderedLine(image=Raster(canvas), text=text, glyph_boxes=tuple(boxes))


def degrade(
    line: RenderedLine,
    atlas: GlyphAtlas,
    salt_pepper: float = 0.0,
    blur_k: int = 1,
    char_corrupt: float = 0.0,
    seed: int = 0,
) -> RenderedLine:
    """Controlled degradation, seeded and reproducible bit-exactly.

    Order: character corruption re-renders the line first (each codepoint
    is replaced by a different atlas codepoint with probability
    ``char_corrupt``, preserving length), then blur, then salt-pepper
    pixel flips. Identity parameters return the line unchanged.
    """
    if not 0.0 <= salt_pepper <= 1.0 or not 0.0 <= char_corrupt <= 1.0:
        raise ValueError("noise probabilities must be in [0, 1]")
    rng = np.random.Generator(np.random.PCG64(seed))

    out = line
    if char_corrupt > 0.0:
        pool = atlas.codepoints
        chars = list(line.text)
        for i, cp in enumerate(chars):
            if rng.random() >= char_corrupt:
                continue
            choices = [c for c in pool if c != cp]
            if not choices:
                continue
            chars[i] = choices[rng.integers(len(choices))]
        out = render_line("".join(chars), atlas)

    img = out.image
    if blur_k > 1:
        img = box_blur(img, blur_k)
    if salt_pepper > 0.0:
        a = img.array.copy()
        flip = rng.random(a.shape) < salt_pepper
        values = rng.integers(0, 2, size=a.shape).astype(np.uint8) * 255
        a[flip] = values[flip]
        img = Raster(a)
    if img is not out.image:
        out = RenderedLine(image=img, text=out.text, glyph_boxes=out.glyph_boxes)
    return out


def word_corrupt(
    line: RenderedLine, atlas: GlyphAtlas, p: float, seed: int = 0
) -> RenderedLine:
    """Corrupt whole words: every codepoint of a hit word is replaced.

    Convenience wrapper over character corruption applied word-wise.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    pool = atlas.codepoints
    words = line.text.split(" ")
    for w, word in enumerate(words):
        if rng.random() >= p:
            continue
        new = []
        for cp in word:
            choices = [c for c in pool if c != cp]
            new.append(choices[rng.integers(len(choices))] if choices else cp)
        words[w] = "".join(new)
    return render_line(" ".join(words), atlas)


def random_sentences(
    count: int,
    seed: int = 0,
    atlas: GlyphAtlas | None = None,
    words_range: tuple[int, int] = (3, 6),
    word_len_range: tuple[int, int] = (2, 5),
) -> list[str]:
    """Seeded random sentences over the atlas alphabet."""
    a = atlas if atlas is not None else default_atlas()
    pool = a.codepoints
    rng = np.random.Generator(np.random.PCG64(seed))
    sentences = []
    for _ in range(count):
        n_words = rng.integers(words_range[0], words_range[1] + 1)
        words = []
        for _ in range(n_words):
            n = rng.integers(word_len_range[0], word_len_range[1] + 1)
            words.append("".join(pool[rng.integers(len(pool))] for _ in range(n)))
        sentences.append(normalize_text(" ".join(words)))
    return sentences


def _corpus_id(index: int, per_author: int = 20) -> str:
    author = index // per_author + 1
    seq = index % per_author + 1
    if author > 99:
        raise ValueError("corpus exceeds the two-digit author id space")
    return f"a{author:02d}_{seq:02d}"


def write_corpus(
    out_dir: Path | str,
    count: int,
    seed: int = 0,
    atlas: GlyphAtlas | None = None,
    salt_pepper: float = 0.0,
    blur_k: int = 1,
    char_corrupt: float = 0.0,
) -> list[RenderedLine]:
    """Emit ``<id>.png`` + ``<id>.gt.txt`` pairs plus ``boxes.jsonl``.

    Ids follow the dataset naming convention (batch "a", 20 lines per
    author). Per-line seeds derive as seed + index, so lines are
    independently reproducible.
    """
    from .imaging import save_png

    a = atlas if atlas is not None else default_atlas()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sentences = random_sentences(count, seed=seed, atlas=a)
    lines = []
    box_records = []
    for i, sentence in enumerate(sentences):
        line = render_line(sentence, a)
        line = degrade(
            line,
            a,
            salt_pepper=salt_pepper,
            blur_k=blur_k,
            char_corrupt=char_corrupt,
            seed=seed + i,
        )
        sample_id = _corpus_id(i)
        save_png(line.image, out / f"{sample_id}.png")
        write_ground_truth(out / f"{sample_id}.gt.txt", line.text)
        box_records.append(
            {
                "id": sample_id,
                "text": line.text,
                "boxes": [
                    {"cp": cp, "x": x, "y": y, "w": w, "h": h}
                    for cp, (x, y, w, h) in line.glyph_boxes
                ],
            }
        )
        lines.append(line)
    with open(out / "boxes.jsonl", "w", encoding="utf-8") as fh:
        for record in box_records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    return lines
