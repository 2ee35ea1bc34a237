"""Uniform interface to OCR engines.

Two kinds: an external-process adapter (command template with an {image}
placeholder, stdout is the hypothesis) and a built-in reference
recognizer. The reference recognizer segments a binary line image into
connected components, reads them right to left, and classifies each by
nearest 16x16 prototype under Hamming distance. It requires non-touching
glyphs and exists to exercise the pipeline end to end, not to model
cursive handwriting.
"""

from __future__ import annotations

import json
import shlex
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .imaging import Raster
from .synth import RenderedLine
from .textnorm import EmptyAfterNormalization, normalize_text

__all__ = [
    "EngineConfig",
    "EngineHandle",
    "ReferenceModel",
    "EngineFailure",
    "EngineTimeout",
    "InvalidUtf8",
    "NoSamples",
    "UnlabeledGlyph",
    "EmptyLine",
    "run_external",
    "train_reference",
    "recognize_reference",
    "recognize_detailed",
]

PROTO_SIZE = 16

CONFIG_KEYS = ("LEARNING_RATE", "MAX_ITERATIONS", "START_MODEL", "LANG_TYPE", "RATIO_TRAIN")


class EngineFailure(RuntimeError):
    """External engine exited nonzero; stderr is attached."""

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class EngineTimeout(RuntimeError):
    """External engine exceeded its timeout."""


class InvalidUtf8(ValueError):
    """External engine produced undecodable output."""


class NoSamples(ValueError):
    """Training needs at least one labeled sample."""


class UnlabeledGlyph(ValueError):
    """A glyph box carries no usable label."""


class EmptyLine(ValueError):
    """The line image contains no ink components."""


@dataclass(frozen=True)
class EngineConfig:
    """Training configuration exported alongside a dataset layout."""

    name: str = "esyr"
    learning_rate: float = 0.0001
    max_iterations: int = 10000
    start_model: str = "syr"
    lang_type: str = "RTL"
    ratio_train: float = 0.9

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("engine config needs a nonempty name")
        if not 0.0 < self.ratio_train < 1.0:
            raise ValueError("ratio_train must be in (0, 1)")

    def to_key_value(self) -> str:
        """Plain KEY VALUE lines, one per parameter."""
        return (
            f"LEARNING_RATE {self.learning_rate}\n"
            f"MAX_ITERATIONS {self.max_iterations}\n"
            f"START_MODEL {self.start_model}\n"
            f"LANG_TYPE {self.lang_type}\n"
            f"RATIO_TRAIN {self.ratio_train}\n"
        )

    @classmethod
    def from_key_value(cls, text: str, name: str = "esyr") -> "EngineConfig":
        values: dict[str, str] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition(" ")
            values[key] = value.strip()
        unknown = set(values) - set(CONFIG_KEYS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(
            name=name,
            learning_rate=float(values.get("LEARNING_RATE", 0.0001)),
            max_iterations=int(values.get("MAX_ITERATIONS", 10000)),
            start_model=values.get("START_MODEL", "syr"),
            lang_type=values.get("LANG_TYPE", "RTL"),
            ratio_train=float(values.get("RATIO_TRAIN", 0.9)),
        )


@dataclass(frozen=True)
class EngineHandle:
    """How to invoke an engine: an external command or a trained model."""

    kind: str  # "external" | "reference"
    command: str = ""
    model: "ReferenceModel | None" = None
    timeout: float = 30.0

    def __post_init__(self) -> None:
        if self.kind == "external":
            if self.command.count("{image}") != 1:
                raise ValueError("command template needs exactly one {image} placeholder")
        elif self.kind == "reference":
            if self.model is None:
                raise ValueError("reference handle needs a trained model")
        else:
            raise ValueError(f"unknown engine kind {self.kind!r}")


def run_external(handle: EngineHandle, image: Path | str) -> str:
    """Spawn the engine on one image and return its normalized stdout.

    Empty output stays an empty hypothesis (everything deleted) rather
    than an error.
    """
    if handle.kind != "external":
        raise ValueError("run_external needs an external handle")
    image = Path(image)
    if not image.exists():
        raise FileNotFoundError(image)
    argv = [arg.replace("{image}", str(image)) for arg in shlex.split(handle.command)]
    try:
        proc = subprocess.run(
            argv, capture_output=True, timeout=handle.timeout, check=False
        )
    except subprocess.TimeoutExpired as exc:
        raise EngineTimeout(f"engine exceeded {handle.timeout}s on {image.name}") from exc
    if proc.returncode != 0:
        stderr = proc.stderr.decode("utf-8", errors="replace")
        raise EngineFailure(
            f"engine exited {proc.returncode} on {image.name}", stderr=stderr
        )
    try:
        text = proc.stdout.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise InvalidUtf8(f"engine output is not UTF-8 on {image.name}") from exc
    try:
        return normalize_text(text)
    except EmptyAfterNormalization:
        return ""


@dataclass(frozen=True)
class ReferenceModel:
    """Per-class 16x16 prototype bitmaps plus a space-gap threshold."""

    prototypes: dict[str, np.ndarray]
    space_gap_threshold: float

    def __post_init__(self) -> None:
        if not self.prototypes:
            raise ValueError("model needs at least one prototype")
        for label, proto in self.prototypes.items():
            if proto.shape != (PROTO_SIZE, PROTO_SIZE):
                raise ValueError(f"prototype for {label!r} is not {PROTO_SIZE}x{PROTO_SIZE}")

    def save(self, path: Path | str) -> None:
        doc = {
            "space_gap_threshold": self.space_gap_threshold,
            "prototypes": {
                label: "".join("1" if v else "0" for v in proto.ravel())
                for label, proto in self.prototypes.items()
            },
        }
        Path(path).write_text(json.dumps(doc, ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: Path | str) -> "ReferenceModel":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        protos = {
            label: np.array([c == "1" for c in bits], dtype=bool).reshape(
                PROTO_SIZE, PROTO_SIZE
            )
            for label, bits in doc["prototypes"].items()
        }
        return cls(prototypes=protos, space_gap_threshold=doc["space_gap_threshold"])


def _normalize_crop(mask: np.ndarray) -> np.ndarray:
    """Area-mean resample of an ink mask to the prototype size.

    Each output cell is the majority vote of its source block, which
    keeps prototypes stable when lines pass through geometry scaling
    (nearest-neighbor sampling aliases thin strokes away).
    """
    h, w = mask.shape
    ii = np.zeros((h + 1, w + 1), dtype=np.int64)
    ii[1:, 1:] = mask.astype(np.int64).cumsum(axis=0).cumsum(axis=1)
    edges_y = (np.arange(PROTO_SIZE + 1) * h) // PROTO_SIZE
    edges_x = (np.arange(PROTO_SIZE + 1) * w) // PROTO_SIZE
    y0 = np.minimum(edges_y[:-1], h - 1)
    y1 = np.clip(np.maximum(edges_y[1:], y0 + 1), 1, h)
    x0 = np.minimum(edges_x[:-1], w - 1)
    x1 = np.clip(np.maximum(edges_x[1:], x0 + 1), 1, w)
    sums = ii[y1][:, x1] - ii[y0][:, x1] - ii[y1][:, x0] + ii[y0][:, x0]
    areas = (y1 - y0)[:, None] * (x1 - x0)[None, :]
    return sums * 2 >= areas


def train_reference(lines: list[RenderedLine]) -> ReferenceModel:
    """Build per-class prototypes and the space-gap threshold.

    Each glyph crop (ink = dark, as rendered) is normalized to 16x16;
    the class prototype is the thresholded mean of its crops. The space
    threshold is the midpoint between the median intra-word gap and the
    median inter-word gap observed across the training lines.
    """
    if not lines:
        raise NoSamples("no training lines")
    crops: dict[str, list[np.ndarray]] = {}
    intra_gaps: list[int] = []
    inter_gaps: list[int] = []
    for line in lines:
        arr = line.image.array
        for cp, (x, y, w, h) in line.glyph_boxes:
            if not cp or cp.isspace():
                raise UnlabeledGlyph(f"glyph box with label {cp!r}")
            mask = arr[y : y + h, x : x + w] < 128
            crops.setdefault(cp, []).append(_normalize_crop(mask))
        # Walk the text to tag each consecutive-glyph gap as intra or inter.
        boxes = line.glyph_boxes
        g = 0
        after_space = False
        prev_box = None
        for cp in line.text:
            if cp == " ":
                after_space = True
                continue
            box = boxes[g][1]
            if prev_box is not None:
                gap = prev_box[0] - (box[0] + box[2])
                (inter_gaps if after_space else intra_gaps).append(gap)
            prev_box = box
            after_space = False
            g += 1
    prototypes = {
        cp: np.mean(np.stack(class_crops), axis=0) >= 0.5
        for cp, class_crops in crops.items()
    }
    if intra_gaps and inter_gaps:
        threshold = (float(np.median(intra_gaps)) + float(np.median(inter_gaps))) / 2.0
    else:
        threshold = float("inf")  # no spaces observed: never emit one
    return ReferenceModel(prototypes=prototypes, space_gap_threshold=threshold)


def _components_rtl(mask: np.ndarray) -> list[tuple[int, int, np.ndarray]]:
    """Ink components as (x0, x1_exclusive, crop_mask), right to left."""
    labels, count = ndimage.label(mask, structure=np.ones((3, 3), dtype=bool))
    if count == 0:
        raise EmptyLine("no ink components in line")
    comps = []
    for index, slc in enumerate(ndimage.find_objects(labels), start=1):
        ys, xs = slc
        comps.append((xs.start, xs.stop, labels[slc] == index))
    comps.sort(key=lambda c: -(c[0] + c[1]))  # descending x-center
    return comps


def recognize_detailed(
    model: ReferenceModel, line: Raster
) -> list[tuple[str, float, tuple[int, int]]]:
    """Classify every component: (label, confidence, (x0, x1)) in RTL order.

    Expects a binarized raster with nonzero foreground ink. Confidence is
    normalized Hamming similarity to the winning prototype.
    """
    if line.channels != 1:
        raise ValueError("recognizer expects a 1-channel binary raster")
    mask = line.array != 0
    comps = _components_rtl(mask)
    labels = sorted(model.prototypes)
    protos = np.stack([model.prototypes[label] for label in labels]).reshape(
        len(labels), -1
    )
    results = []
    for x0, x1, crop in comps:
        vec = _normalize_crop(crop).ravel()
        dists = np.count_nonzero(protos != vec, axis=1)
        best = int(np.argmin(dists))
        confidence = 1.0 - dists[best] / vec.size
        results.append((labels[best], float(confidence), (x0, x1)))
    return results


def recognize_reference(model: ReferenceModel, line: Raster) -> str:
    """Read a binary line image right to left into normalized text.

    Gaps wider than the model's space threshold emit a single space.
    Deterministic: identical image, identical string.
    """
    glyphs = recognize_detailed(model, line)
    parts = [glyphs[0][0]]
    for prev, cur in zip(glyphs, glyphs[1:]):
        gap = prev[2][0] - cur[2][1]
        if gap > model.space_gap_threshold:
            parts.append(" ")
        parts.append(cur[0])
    return normalize_text("".join(parts))
