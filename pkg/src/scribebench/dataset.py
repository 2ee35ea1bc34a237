"""Sample registry: ingest image/ground-truth pairs, manage volunteer
metadata, produce deterministic splits, compute corpus statistics, and
export training layouts for an external engine.

The registry persists as ``manifest.jsonl``, one sample per line, which
keeps it append- and diff-friendly. Splits are driven by a splitmix64
stream feeding a Fisher-Yates shuffle over lexicographically sorted ids,
so the same inputs and seed give the identical assignment on any
platform.
"""

from __future__ import annotations

import csv
import json
import math
import re
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .engines import EngineConfig
from .textnorm import Charset, normalize_text, validate_charset, write_ground_truth

__all__ = [
    "ID_PATTERN",
    "Sample",
    "VolunteerRecord",
    "SplitSpec",
    "SplitAssignment",
    "CorpusStats",
    "Registry",
    "IngestError",
    "OrphanImage",
    "OrphanTruth",
    "BadName",
    "EmptyRegistry",
    "UnassignedSamples",
    "SampleNotFound",
    "RevisionConflict",
    "ValidationFailed",
    "splitmix64",
    "load_volunteers",
]

ID_PATTERN = re.compile(r"^(?P<batch>[ab])(?P<author>[0-9]{2})_(?P<seq>[0-9]{2})$")

STATUSES = ("raw", "clean", "rejected")
SPLITS = ("train", "eval", "test", "unassigned")


class IngestError(ValueError):
    """Base for ingest failures; carries the offending ids."""

    def __init__(self, ids: list[str]):
        self.ids = ids
        super().__init__(f"{type(self).__name__}: {', '.join(ids)}")


class OrphanImage(IngestError):
    """Image file without a ground-truth partner."""


class OrphanTruth(IngestError):
    """Ground-truth file without an image partner."""


class BadName(IngestError):
    """File stem does not match the id pattern."""


class EmptyRegistry(ValueError):
    """No clean samples to operate on."""


class UnassignedSamples(ValueError):
    """Export requires every clean sample to carry a split."""


class SampleNotFound(KeyError):
    """No sample with that id."""


class RevisionConflict(RuntimeError):
    """Optimistic-concurrency check failed; client must refetch."""

    def __init__(self, sample_id: str, current_revision: int):
        self.sample_id = sample_id
        self.current_revision = current_revision
        super().__init__(f"{sample_id}: revision is {current_revision}")


class ValidationFailed(ValueError):
    """Charset violations blocked a mutation."""

    def __init__(self, violations: list[tuple[int, str]]):
        self.violations = violations
        super().__init__(f"{len(violations)} charset violation(s)")


MASK64 = (1 << 64) - 1


def splitmix64(seed: int) -> Iterator[int]:
    """The splitmix64 stream; portable across implementations."""
    state = seed & MASK64
    while True:
        state = (state + 0x9E3779B97F4A7C15) & MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        yield z ^ (z >> 31)


@dataclass
class Sample:
    """One line image with its ground truth and curation state."""

    id: str
    batch: str
    author: int
    seq: int
    image_path: str
    ground_truth: str
    status: str = "clean"
    revision: int = 1
    split: str = "unassigned"

    def to_manifest(self) -> dict:
        return {
            "id": self.id,
            "batch": self.batch,
            "author": self.author,
            "seq": self.seq,
            "image": self.image_path,
            "gt": self.ground_truth,
            "status": self.status,
            "revision": self.revision,
            "split": self.split,
        }

    @classmethod
    def from_manifest(cls, doc: dict) -> "Sample":
        return cls(
            id=doc["id"],
            batch=doc["batch"],
            author=doc["author"],
            seq=doc["seq"],
            image_path=doc["image"],
            ground_truth=doc["gt"],
            status=doc["status"],
            revision=doc["revision"],
            split=doc["split"],
        )


@dataclass(frozen=True)
class VolunteerRecord:
    gender: str
    age: int
    occupation: str
    origin: str = "N/A"

    def __post_init__(self) -> None:
        if self.gender not in ("Female", "Male"):
            raise ValueError(f"gender must be Female or Male, got {self.gender!r}")
        if self.age <= 0:
            raise ValueError("age must be positive")


@dataclass(frozen=True)
class SplitSpec:
    """Split parameters. ``by_author`` keeps each writer wholly in one
    side (sizes then only approximate the ratio); the default is the
    plain per-sample ratio split."""

    ratio_train: float = 0.9
    seed: int = 0
    by_author: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.ratio_train < 1.0:
            raise ValueError("ratio_train must be in (0, 1)")


@dataclass(frozen=True)
class SplitAssignment:
    train: tuple[str, ...]
    eval: tuple[str, ...]

    def split_of(self, sample_id: str) -> str | None:
        if sample_id in self._train_set:
            return "train"
        if sample_id in self._eval_set:
            return "eval"
        return None

    @property
    def _train_set(self) -> frozenset[str]:
        return frozenset(self.train)

    @property
    def _eval_set(self) -> frozenset[str]:
        return frozenset(self.eval)


@dataclass(frozen=True)
class CorpusStats:
    sample_count: int
    author_count: int
    status_counts: dict[str, int]
    split_counts: dict[str, int]
    gender_counts: dict[str, int]
    mean_age: float | None


class Registry:
    """In-memory sample registry backed by a manifest file.

    Single-writer discipline: callers serialize mutations (the service
    wraps them in one lock); every mutation bumps the sample revision.
    """

    def __init__(self, root: Path | str, samples: dict[str, Sample] | None = None):
        self.root = Path(root)
        self.samples: dict[str, Sample] = samples or {}

    # -- construction ---------------------------------------------------

    @classmethod
    def ingest(
        cls,
        directory: Path | str,
        status: str = "clean",
        id_pattern: re.Pattern = ID_PATTERN,
    ) -> "Registry":
        """Pair every ``<id>.png`` with ``<id>.gt.txt`` under the naming
        convention; ground truth goes through text normalization.

        Raises BadName/OrphanImage/OrphanTruth listing every offender of
        the first failing kind, in sorted order.
        """
        directory = Path(directory)
        pngs = {p.name[: -len(".png")] for p in directory.glob("*.png")}
        gts = {p.name[: -len(".gt.txt")] for p in directory.glob("*.gt.txt")}
        bad = sorted(s for s in pngs | gts if not id_pattern.match(s))
        if bad:
            raise BadName(bad)
        orphan_images = sorted(pngs - gts)
        if orphan_images:
            raise OrphanImage(orphan_images)
        orphan_truths = sorted(gts - pngs)
        if orphan_truths:
            raise OrphanTruth(orphan_truths)

        samples = {}
        for sample_id in sorted(pngs):
            m = id_pattern.match(sample_id)
            text = normalize_text(
                (directory / f"{sample_id}.gt.txt").read_text(encoding="utf-8")
            )
            samples[sample_id] = Sample(
                id=sample_id,
                batch=m.group("batch"),
                author=int(m.group("author")),
                seq=int(m.group("seq")),
                image_path=f"{sample_id}.png",
                ground_truth=text,
                status=status,
            )
        return cls(root=directory, samples=samples)

    @classmethod
    def load_manifest(cls, path: Path | str) -> "Registry":
        path = Path(path)
        samples = {}
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                sample = Sample.from_manifest(json.loads(line))
                samples[sample.id] = sample
        return cls(root=path.parent, samples=samples)

    def save_manifest(self, path: Path | str | None = None) -> Path:
        """Write the manifest atomically (temp file then replace)."""
        path = Path(path) if path else self.root / "manifest.jsonl"
        tmp = path.with_suffix(".jsonl.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for sample_id in sorted(self.samples):
                fh.write(
                    json.dumps(self.samples[sample_id].to_manifest(), ensure_ascii=False)
                    + "\n"
                )
        tmp.replace(path)
        return path

    # -- queries ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self.samples)

    def get(self, sample_id: str) -> Sample:
        try:
            return self.samples[sample_id]
        except KeyError:
            raise SampleNotFound(sample_id) from None

    def ids(self) -> list[str]:
        return sorted(self.samples)

    def clean_ids(self) -> list[str]:
        return sorted(s.id for s in self.samples.values() if s.status == "clean")

    def image_file(self, sample_id: str) -> Path:
        return self.root / self.get(sample_id).image_path

    # -- mutations --------------------------------------------------------

    def patch(
        self,
        sample_id: str,
        ground_truth: str | None = None,
        status: str | None = None,
        split: str | None = None,
        expected_revision: int | None = None,
        force: bool = False,
        charset: Charset | None = None,
    ) -> Sample:
        """Apply a curation mutation; bumps the revision exactly once.

        Optimistic concurrency: a stale expected_revision raises
        RevisionConflict and changes nothing. New ground truth is
        normalized and charset-checked (violations reject the mutation
        unless forced).
        """
        sample = self.get(sample_id)
        if expected_revision is not None and expected_revision != sample.revision:
            raise RevisionConflict(sample_id, sample.revision)
        if ground_truth is None and status is None and split is None:
            raise ValueError("patch needs at least one mutable field")
        if status is not None and status not in STATUSES:
            raise ValueError(f"unknown status {status!r}")
        if split is not None and split not in SPLITS:
            raise ValueError(f"unknown split {split!r}")
        if ground_truth is not None:
            ground_truth = normalize_text(ground_truth)
            violations = validate_charset(ground_truth, charset)
            if violations and not force:
                raise ValidationFailed(violations)
            sample.ground_truth = ground_truth
        if status is not None:
            sample.status = status
        if split is not None:
            sample.split = split
        sample.revision += 1
        return sample

    def bump_revision(self, sample_id: str) -> Sample:
        """Record a non-field mutation (e.g. a new processed stage)."""
        sample = self.get(sample_id)
        sample.revision += 1
        return sample

    def split(self, spec: SplitSpec) -> SplitAssignment:
        """Deterministic seeded split over the clean samples.

        Ids are sorted, shuffled by Fisher-Yates over the splitmix64
        stream, and the first floor(N * ratio) go to train. The
        assignment is also written onto the samples' ``split`` fields.
        """
        ids = self.clean_ids()
        if not ids:
            raise EmptyRegistry("no clean samples to split")
        rng = splitmix64(spec.seed)
        n_train = math.floor(len(ids) * spec.ratio_train)
        if spec.by_author:
            authors = sorted({self.get(i).author for i in ids})
            for i in range(len(authors) - 1, 0, -1):
                j = next(rng) % (i + 1)
                authors[i], authors[j] = authors[j], authors[i]
            by_author: dict[int, list[str]] = {a: [] for a in authors}
            for sample_id in ids:
                by_author[self.get(sample_id).author].append(sample_id)
            train: list[str] = []
            evals: list[str] = []
            for author in authors:
                side = train if len(train) < n_train else evals
                side.extend(by_author[author])
            assignment = SplitAssignment(train=tuple(train), eval=tuple(evals))
        else:
            for i in range(len(ids) - 1, 0, -1):
                j = next(rng) % (i + 1)
                ids[i], ids[j] = ids[j], ids[i]
            assignment = SplitAssignment(
                train=tuple(ids[:n_train]), eval=tuple(ids[n_train:])
            )
        for sample_id in assignment.train:
            self.patch(sample_id, split="train")
        for sample_id in assignment.eval:
            self.patch(sample_id, split="eval")
        return assignment

    # -- statistics --------------------------------------------------------

    def stats(self, volunteers: list[VolunteerRecord] | None = None) -> CorpusStats:
        volunteers = volunteers or []
        status_counts = {s: 0 for s in STATUSES}
        split_counts = {s: 0 for s in SPLITS}
        for sample in self.samples.values():
            status_counts[sample.status] += 1
            split_counts[sample.split] += 1
        gender_counts: dict[str, int] = {}
        for v in volunteers:
            gender_counts[v.gender] = gender_counts.get(v.gender, 0) + 1
        mean_age = (
            round(sum(v.age for v in volunteers) / len(volunteers), 1)
            if volunteers
            else None
        )
        return CorpusStats(
            sample_count=len(self.samples),
            author_count=len({s.author for s in self.samples.values()}),
            status_counts=status_counts,
            split_counts=split_counts,
            gender_counts=gender_counts,
            mean_age=mean_age,
        )

    # -- export -------------------------------------------------------------

    def export_training_layout(
        self,
        assignment: SplitAssignment,
        cfg: EngineConfig,
        out_dir: Path | str,
    ) -> list[dict]:
        """Write the training layout an external trainer consumes.

        Per-sample ``<id>.png`` + ``<id>.gt.txt`` pairs, the engine
        config verbatim as KEY VALUE lines, ``list.train``/``list.eval``
        id lists, and a manifest of the exported subset. Deterministic:
        re-export of unchanged data is byte-identical.
        """
        clean = set(self.clean_ids())
        covered = set(assignment.train) | set(assignment.eval)
        missing = sorted(clean - covered)
        if missing:
            raise UnassignedSamples(f"samples without a split: {', '.join(missing)}")

        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        train_set = set(assignment.train)
        manifest = []
        for sample_id in sorted(covered):
            sample = self.get(sample_id)
            shutil.copyfile(self.root / sample.image_path, out / f"{sample_id}.png")
            write_ground_truth(out / f"{sample_id}.gt.txt", sample.ground_truth)
            doc = sample.to_manifest()
            doc["split"] = "train" if sample_id in train_set else "eval"
            manifest.append(doc)
        (out / "engine.cfg").write_text(cfg.to_key_value(), encoding="utf-8")
        (out / "list.train").write_text(
            "".join(f"{i}\n" for i in sorted(assignment.train)), encoding="utf-8"
        )
        (out / "list.eval").write_text(
            "".join(f"{i}\n" for i in sorted(assignment.eval)), encoding="utf-8"
        )
        with open(out / "manifest.jsonl", "w", encoding="utf-8") as fh:
            for doc in manifest:
                fh.write(json.dumps(doc, ensure_ascii=False) + "\n")
        return manifest


def load_volunteers(path: Path | str) -> list[VolunteerRecord]:
    """Read volunteer metadata CSV (header: gender,age,occupation,origin)."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            records.append(
                VolunteerRecord(
                    gender=row["gender"],
                    age=int(row["age"]),
                    occupation=row["occupation"],
                    origin=row.get("origin") or "N/A",
                )
            )
    return records
