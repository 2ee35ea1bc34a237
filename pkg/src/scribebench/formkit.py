"""Collection-form pages: render sentence slots with fiducials, then
recover per-slot crops from scanned pages.

Forms print four filled 5 mm corner squares; scans are registered by
detecting those squares and least-squares fitting the affine map from
template millimeters to scan pixels. Extraction is thereby deterministic
instead of relying on generic rectangle detection.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .imaging import Raster, to_grayscale
from .synth import GlyphAtlas, default_atlas

__all__ = [
    "SlotBox",
    "TemplateDescriptor",
    "ScanRegistration",
    "CapacityExceeded",
    "EmptySentences",
    "FiducialsNotFound",
    "PoorFit",
    "SlotOutOfBounds",
    "render_template",
    "register_scan",
    "registration_from_dpi",
    "extract_boxes",
    "map_slot_rects",
]

A4_MM = (210.0, 297.0)
FIDUCIAL_SIDE_MM = 5.0
FIDUCIAL_MARGIN_MM = 10.0  # center distance from each page edge
DEFAULT_CAPACITY = 20
CROP_INSET = 0.02  # strip the printed border line
MAX_RESIDUAL_PX = 5.0


class CapacityExceeded(ValueError):
    """More sentences than the layout has slots."""


class EmptySentences(ValueError):
    """A form needs at least one sentence."""


class FiducialsNotFound(RuntimeError):
    """Fewer than three fiducial marks detected."""


class PoorFit(RuntimeError):
    """Affine fit residual exceeds the acceptance bound."""


class SlotOutOfBounds(RuntimeError):
    """A mapped slot falls outside the scan."""


@dataclass(frozen=True)
class SlotBox:
    slot_id: int
    x_mm: float
    y_mm: float
    w_mm: float
    h_mm: float
    prompt_text: str = ""

    def __post_init__(self) -> None:
        if self.w_mm <= 0 or self.h_mm <= 0:
            raise ValueError("slot dimensions must be positive")


@dataclass(frozen=True)
class TemplateDescriptor:
    """Physical geometry of one collection form page."""

    template_id: str
    page_mm: tuple[float, float]
    fiducials: tuple[tuple[float, float], ...]  # 4 corner-mark centers, mm
    slots: tuple[SlotBox, ...]

    def __post_init__(self) -> None:
        if len(self.fiducials) != 4:
            raise ValueError("a template has exactly 4 fiducials")
        ids = [s.slot_id for s in self.slots]
        if len(ids) != len(set(ids)):
            raise ValueError("slot ids must be unique")
        w, h = self.page_mm
        for s in self.slots:
            if s.x_mm < 0 or s.y_mm < 0 or s.x_mm + s.w_mm > w or s.y_mm + s.h_mm > h:
                raise ValueError(f"slot {s.slot_id} outside page bounds")

    def to_json(self) -> str:
        doc = {
            "template_id": self.template_id,
            "page_mm": list(self.page_mm),
            "fiducials": [{"x": x, "y": y} for x, y in self.fiducials],
            "slots": [
                {
                    "slot_id": s.slot_id,
                    "x": s.x_mm,
                    "y": s.y_mm,
                    "w": s.w_mm,
                    "h": s.h_mm,
                    "prompt": s.prompt_text,
                }
                for s in self.slots
            ],
        }
        return json.dumps(doc, ensure_ascii=False, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TemplateDescriptor":
        doc = json.loads(text)
        return cls(
            template_id=doc["template_id"],
            page_mm=tuple(doc["page_mm"]),
            fiducials=tuple((f["x"], f["y"]) for f in doc["fiducials"]),
            slots=tuple(
                SlotBox(
                    slot_id=s["slot_id"],
                    x_mm=s["x"],
                    y_mm=s["y"],
                    w_mm=s["w"],
                    h_mm=s["h"],
                    prompt_text=s["prompt"],
                )
                for s in doc["slots"]
            ),
        )

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: Path | str) -> "TemplateDescriptor":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ScanRegistration:
    """Affine map from template mm to scan pixels, with fit quality."""

    dpi: float
    affine: tuple[float, float, float, float, float, float]  # a b tx c d ty
    residual_px: float

    def __post_init__(self) -> None:
        a, b, _, c, d, _ = self.affine
        if abs(a * d - b * c) < 1e-9:
            raise ValueError("affine map must be invertible")
        if self.residual_px < 0:
            raise ValueError("residual must be nonnegative")

    def apply(self, x_mm: float, y_mm: float) -> tuple[float, float]:
        a, b, tx, c, d, ty = self.affine
        return (a * x_mm + b * y_mm + tx, c * x_mm + d * y_mm + ty)


def _mm_to_px(mm: float, dpi: float) -> int:
    return int(round(mm * dpi / 25.4))


def _draw_rect_border(page: np.ndarray, x0: int, y0: int, x1: int, y1: int, t: int) -> None:
    """Border drawn outward so the slot interior stays printable area."""
    page[y0 - t : y0, x0 - t : x1 + t] = 0
    page[y1 : y1 + t, x0 - t : x1 + t] = 0
    page[y0 - t : y1 + t, x0 - t : x0] = 0
    page[y0 - t : y1 + t, x1 : x1 + t] = 0


def _draw_prompt(
    page: np.ndarray, text: str, atlas: GlyphAtlas, x1_px: int, y1_px: int, height_px: int
) -> None:
    """Right-aligned prompt above a slot, scaled to the strip height.

    Codepoints missing from the atlas draw as hollow boxes so arbitrary
    text never fails template rendering.
    """
    from .synth import render_line

    fallback = np.zeros((32, 24), dtype=bool)
    fallback[:2, :] = fallback[-2:, :] = True
    fallback[:, :2] = fallback[:, -2:] = True
    safe = "".join(c if c == " " or c in atlas.glyphs else "\x00" for c in text)
    glyphs = dict(atlas.glyphs)
    glyphs["\x00"] = fallback
    line = render_line(safe, GlyphAtlas(glyphs, atlas.inter_glyph_gap, atlas.inter_word_gap))
    ink = line.image.array < 128
    h, w = ink.shape
    scale = height_px / h
    sw = max(1, int(round(w * scale)))
    ys = (np.arange(height_px) * h) // height_px
    xs = (np.arange(sw) * w) // sw
    scaled = ink[np.ix_(ys, xs)]
    x0 = max(0, x1_px - sw)
    region = page[y1_px - height_px : y1_px, x0 : x0 + scaled.shape[1]]
    region[scaled[:, : region.shape[1]]] = 0


def render_template(
    sentences: list[str],
    page_mm: tuple[float, float] = A4_MM,
    capacity: int = DEFAULT_CAPACITY,
    dpi: float = 300.0,
    atlas: GlyphAtlas | None = None,
) -> tuple[Raster, TemplateDescriptor]:
    """Render a printable form page and its slot descriptor.

    Each sentence gets a prompt strip above an empty writing box; four
    filled corner squares anchor later registration. The descriptor
    round-trips losslessly through its JSON format.
    """
    if not sentences:
        raise EmptySentences("need at least one sentence")
    if len(sentences) > capacity:
        raise CapacityExceeded(f"{len(sentences)} sentences exceed capacity {capacity}")

    page_w, page_h = page_mm
    margin_x = 20.0
    top = 22.0
    bottom = 18.0
    pitch = (page_h - top - bottom) / capacity
    prompt_h = pitch * 0.35
    box_h = pitch * 0.55
    slots = tuple(
        SlotBox(
            slot_id=i + 1,
            x_mm=margin_x,
            y_mm=top + i * pitch + prompt_h,
            w_mm=page_w - 2 * margin_x,
            h_mm=box_h,
            prompt_text=s,
        )
        for i, s in enumerate(sentences)
    )
    m = FIDUCIAL_MARGIN_MM
    fiducials = ((m, m), (page_w - m, m), (m, page_h - m), (page_w - m, page_h - m))
    digest = hashlib.sha1(
        json.dumps([list(page_mm), [list(f) for f in fiducials], sentences]).encode()
    ).hexdigest()[:12]
    tpl = TemplateDescriptor(
        template_id=f"tpl-{digest}",
        page_mm=page_mm,
        fiducials=fiducials,
        slots=slots,
    )

    page = np.full((_mm_to_px(page_h, dpi), _mm_to_px(page_w, dpi)), 255, dtype=np.uint8)
    half = FIDUCIAL_SIDE_MM / 2.0
    for fx, fy in fiducials:
        x0, y0 = _mm_to_px(fx - half, dpi), _mm_to_px(fy - half, dpi)
        x1, y1 = _mm_to_px(fx + half, dpi), _mm_to_px(fy + half, dpi)
        page[y0:y1, x0:x1] = 0
    border = max(1, _mm_to_px(0.4, dpi))
    a = atlas if atlas is not None else default_atlas()
    for slot in slots:
        x0, y0 = _mm_to_px(slot.x_mm, dpi), _mm_to_px(slot.y_mm, dpi)
        x1, y1 = _mm_to_px(slot.x_mm + slot.w_mm, dpi), _mm_to_px(slot.y_mm + slot.h_mm, dpi)
        _draw_rect_border(page, x0, y0, x1, y1, border)
        if slot.prompt_text:
            strip = _mm_to_px(prompt_h * 0.7, dpi)
            _draw_prompt(page, slot.prompt_text, a, x1, y0 - _mm_to_px(0.8, dpi), strip)
    return Raster(page), tpl


def _detect_fiducials(scan: Raster) -> list[tuple[float, float]]:
    """Centroids of the largest solid dark square per corner quadrant.

    Candidates are filtered for squareness (aspect near 1, high fill
    ratio) so slot borders and prompt text never win. Quadrants missing
    a candidate are simply absent from the result.
    """
    gray = to_grayscale(scan).array
    dark = gray <= 127
    h, w = dark.shape
    found = []
    for qy in (0, 1):
        for qx in (0, 1):
            ys = slice(0, h // 2) if qy == 0 else slice(h // 2, h)
            xs = slice(0, w // 2) if qx == 0 else slice(w // 2, w)
            quadrant = dark[ys, xs]
            labels, count = ndimage.label(quadrant, structure=np.ones((3, 3), dtype=bool))
            best = None
            for index, slc in enumerate(ndimage.find_objects(labels), start=1):
                region = labels[slc] == index
                area = int(region.sum())
                bh, bw = region.shape
                if area < 16 or bh < 4 or bw < 4:
                    continue
                aspect = bw / bh
                fill = area / (bh * bw)
                if not (0.5 <= aspect <= 2.0 and fill >= 0.8):
                    continue
                if best is None or area > best[0]:
                    cy, cx = ndimage.center_of_mass(region)
                    best = (area, cx + slc[1].start + xs.start, cy + slc[0].start + ys.start)
            if best is not None:
                found.append((best[1], best[2]))
    return found


def register_scan(scan: Raster, tpl: TemplateDescriptor) -> ScanRegistration:
    """Fit the mm-to-pixel affine map from detected corner fiducials.

    Three detections suffice for an exact fit; four give redundancy and
    a meaningful residual. Detections pair with template fiducials by
    corner, matching on which side of the page center each falls.
    """
    detected = _detect_fiducials(scan)
    if len(detected) < 3:
        raise FiducialsNotFound(f"detected {len(detected)} fiducial(s), need 3")

    h, w = to_grayscale(scan).array.shape
    page_w, page_h = tpl.page_mm

    def corner_key(x, y, cx, cy):
        return (0 if x < cx else 1, 0 if y < cy else 1)

    by_corner_px = {corner_key(x, y, w / 2, h / 2): (x, y) for x, y in detected}
    pairs = []
    for fx, fy in tpl.fiducials:
        key = corner_key(fx, fy, page_w / 2, page_h / 2)
        if key in by_corner_px:
            pairs.append(((fx, fy), by_corner_px[key]))
    if len(pairs) < 3:
        raise FiducialsNotFound(f"only {len(pairs)} fiducial correspondences")

    src = np.array([[mx, my, 1.0] for (mx, my), _ in pairs])
    dst = np.array([list(px) for _, px in pairs])
    coef, *_ = np.linalg.lstsq(src, dst, rcond=None)
    a, c = coef[0]
    b, d = coef[1]
    tx, ty = coef[2]
    fitted = src @ coef
    residual = float(np.mean(np.linalg.norm(fitted - dst, axis=1)))
    if residual > MAX_RESIDUAL_PX:
        raise PoorFit(f"fiducial fit residual {residual:.2f}px")
    dpi = float((np.hypot(a, c) + np.hypot(b, d)) / 2.0 * 25.4)
    return ScanRegistration(dpi=dpi, affine=(a, b, tx, c, d, ty), residual_px=residual)


def registration_from_dpi(dpi: float) -> ScanRegistration:
    """Fixed-coordinate fallback for fiducial-less scans."""
    s = dpi / 25.4
    return ScanRegistration(dpi=dpi, affine=(s, 0.0, 0.0, 0.0, s, 0.0), residual_px=0.0)


def map_slot_rects(
    tpl: TemplateDescriptor, reg: ScanRegistration, inset: float = CROP_INSET
) -> list[tuple[int, tuple[int, int, int, int]]]:
    """Pixel rectangles (x0, y0, x1, y1) for every slot interior.

    Rect is the bounding box of the slot's mapped corners, shrunk by the
    inset fraction to strip the printed border.
    """
    rects = []
    for slot in tpl.slots:
        dx = slot.w_mm * inset
        dy = slot.h_mm * inset
        corners_mm = [
            (slot.x_mm + dx, slot.y_mm + dy),
            (slot.x_mm + slot.w_mm - dx, slot.y_mm + dy),
            (slot.x_mm + dx, slot.y_mm + slot.h_mm - dy),
            (slot.x_mm + slot.w_mm - dx, slot.y_mm + slot.h_mm - dy),
        ]
        pts = [reg.apply(mx, my) for mx, my in corners_mm]
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        rects.append(
            (
                slot.slot_id,
                (
                    int(round(min(xs))),
                    int(round(min(ys))),
                    int(round(max(xs))),
                    int(round(max(ys))),
                ),
            )
        )
    return rects


def extract_boxes(
    scan: Raster, tpl: TemplateDescriptor, reg: ScanRegistration
) -> list[tuple[int, Raster]]:
    """Crop every slot interior from the scan, in slot order.

    Raises rather than returning partial output when any slot maps
    outside the scan.
    """
    gray = to_grayscale(scan)
    h, w = gray.array.shape
    crops = []
    for slot_id, (x0, y0, x1, y1) in map_slot_rects(tpl, reg):
        if x0 < 0 or y0 < 0 or x1 > w or y1 > h or x1 <= x0 or y1 <= y0:
            raise SlotOutOfBounds(f"slot {slot_id} maps to {(x0, y0, x1, y1)}")
        crops.append((slot_id, Raster(gray.array[y0:y1, x0:x1].copy())))
    return crops
