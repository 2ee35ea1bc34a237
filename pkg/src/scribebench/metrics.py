"""Alignment-based CER/WER with explicit substitution/deletion/insertion
counts, plus per-sample and aggregate reporting.

Both rates share one formula, (S + D + I) / N * 100, over character or
word units; N is the reference length in the respective unit and rates
may exceed 100%. Alignments come from a unit-cost edit-distance DP with
a frozen backtrace tie-break (Match > Substitute > Delete > Insert) so
the individual counts are reproducible, not just their sum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

__all__ = [
    "EmptyReference",
    "NoSamples",
    "AlignOp",
    "Alignment",
    "ErrorRates",
    "SampleEval",
    "EvalReport",
    "align",
    "error_rates",
    "aggregate",
    "report_rows",
    "to_tsv",
    "render_table",
    "report_to_json",
]

MATCH = "match"
SUBSTITUTE = "substitute"
DELETE = "delete"
INSERT = "insert"


class EmptyReference(ValueError):
    """The reference has no units, so the rate is undefined."""


class NoSamples(ValueError):
    """Aggregation over zero samples is undefined."""


@dataclass(frozen=True)
class AlignOp:
    """One edit operation; ref/hyp are None for the side not consumed."""

    op: str
    ref_index: int | None
    hyp_index: int | None
    ref: str | None
    hyp: str | None


@dataclass(frozen=True)
class Alignment:
    """Minimal-cost edit alignment between reference and hypothesis."""

    ops: tuple[AlignOp, ...]
    substitutions: int
    deletions: int
    insertions: int
    matches: int
    ref_len: int
    hyp_len: int

    @property
    def distance(self) -> int:
        return self.substitutions + self.deletions + self.insertions


def align(reference: Sequence, hypothesis: Sequence) -> Alignment:
    """Unit-cost edit-distance alignment with backtrace.

    Works over any equatable units (codepoints, words). Deletion consumes
    a reference unit, insertion a hypothesis unit. On cost ties the
    backtrace prefers Match > Substitute > Delete > Insert.
    """
    n, m = len(reference), len(hypothesis)
    cost = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        cost[i][0] = i
    cost[0] = list(range(m + 1))
    for i in range(1, n + 1):
        prev = cost[i - 1]
        cur = cost[i]
        r = reference[i - 1]
        for j in range(1, m + 1):
            diag = prev[j - 1] + (0 if r == hypothesis[j - 1] else 1)
            up = prev[j] + 1
            left = cur[j - 1] + 1
            cur[j] = diag if diag <= up and diag <= left else (up if up <= left else left)

    ops: list[AlignOp] = []
    i, j = n, m
    s = d = ins = match = 0
    while i > 0 or j > 0:
        c = cost[i][j]
        if i > 0 and j > 0 and reference[i - 1] == hypothesis[j - 1] and c == cost[i - 1][j - 1]:
            ops.append(AlignOp(MATCH, i - 1, j - 1, str(reference[i - 1]), str(hypothesis[j - 1])))
            match += 1
            i, j = i - 1, j - 1
        elif i > 0 and j > 0 and c == cost[i - 1][j - 1] + 1:
            ops.append(AlignOp(SUBSTITUTE, i - 1, j - 1, str(reference[i - 1]), str(hypothesis[j - 1])))
            s += 1
            i, j = i - 1, j - 1
        elif i > 0 and c == cost[i - 1][j] + 1:
            ops.append(AlignOp(DELETE, i - 1, None, str(reference[i - 1]), None))
            d += 1
            i -= 1
        else:
            ops.append(AlignOp(INSERT, None, j - 1, None, str(hypothesis[j - 1])))
            ins += 1
            j -= 1
    ops.reverse()
    return Alignment(
        ops=tuple(ops),
        substitutions=s,
        deletions=d,
        insertions=ins,
        matches=match,
        ref_len=n,
        hyp_len=m,
    )


@dataclass(frozen=True)
class ErrorRates:
    """CER/WER percentages with the alignments they came from."""

    cer: float
    wer: float
    char_alignment: Alignment
    word_alignment: Alignment


def _rate(a: Alignment) -> float:
    return a.distance / a.ref_len * 100.0


def error_rates(reference: str, hypothesis: str, ignore_spaces: bool = False) -> ErrorRates:
    """CER from codepoint alignment and WER from word alignment.

    The reference must be non-empty (and contain at least one word); the
    hypothesis may be empty, in which case everything counts as deleted.
    """
    ref_chars = list(reference.replace(" ", "") if ignore_spaces else reference)
    hyp_chars = list(hypothesis.replace(" ", "") if ignore_spaces else hypothesis)
    ref_words = reference.split()
    hyp_words = hypothesis.split()
    if not ref_chars or not ref_words:
        raise EmptyReference("reference has no units; rate undefined")
    ca = align(ref_chars, hyp_chars)
    wa = align(ref_words, hyp_words)
    return ErrorRates(cer=_rate(ca), wer=_rate(wa), char_alignment=ca, word_alignment=wa)


@dataclass(frozen=True)
class SampleEval:
    """Per-sample rates plus the pooled-count inputs for micro averages.

    char_counts/word_counts are (S, D, I, N) tuples.
    """

    sample_id: str
    cer: float
    wer: float
    char_counts: tuple[int, int, int, int]
    word_counts: tuple[int, int, int, int]

    @classmethod
    def from_rates(cls, sample_id: str, rates: ErrorRates) -> "SampleEval":
        ca, wa = rates.char_alignment, rates.word_alignment
        return cls(
            sample_id=sample_id,
            cer=rates.cer,
            wer=rates.wer,
            char_counts=(ca.substitutions, ca.deletions, ca.insertions, ca.ref_len),
            word_counts=(wa.substitutions, wa.deletions, wa.insertions, wa.ref_len),
        )

    @classmethod
    def from_counts(
        cls,
        sample_id: str,
        char_counts: tuple[int, int, int, int],
        word_counts: tuple[int, int, int, int],
    ) -> "SampleEval":
        cs, cd, ci, cn = char_counts
        ws, wd, wi, wn = word_counts
        return cls(
            sample_id=sample_id,
            cer=(cs + cd + ci) / cn * 100.0,
            wer=(ws + wd + wi) / wn * 100.0,
            char_counts=char_counts,
            word_counts=word_counts,
        )


@dataclass(frozen=True)
class EvalReport:
    """Per-sample and aggregated CER/WER for one engine on one dataset."""

    engine_name: str
    dataset_name: str
    per_sample: tuple[SampleEval, ...]
    macro_cer: float = field(init=False)
    macro_wer: float = field(init=False)
    micro_cer: float = field(init=False)
    micro_wer: float = field(init=False)

    def __post_init__(self) -> None:
        if not self.per_sample:
            raise NoSamples("report needs at least one sample")
        n = len(self.per_sample)
        object.__setattr__(self, "macro_cer", sum(s.cer for s in self.per_sample) / n)
        object.__setattr__(self, "macro_wer", sum(s.wer for s in self.per_sample) / n)
        object.__setattr__(self, "micro_cer", _pooled(s.char_counts for s in self.per_sample))
        object.__setattr__(self, "micro_wer", _pooled(s.word_counts for s in self.per_sample))


def _pooled(counts) -> float:
    es = en = 0
    for s, d, i, n in counts:
        es += s + d + i
        en += n
    return es / en * 100.0


def aggregate(
    per_sample: Sequence[SampleEval],
    engine_name: str = "engine",
    dataset_name: str = "dataset",
) -> EvalReport:
    """Fold per-sample evaluations into a report.

    Macro values are arithmetic means of the per-sample rates (the
    headline numbers); micro values are pooled-count ratios reported
    alongside for diagnostics.
    """
    return EvalReport(
        engine_name=engine_name,
        dataset_name=dataset_name,
        per_sample=tuple(per_sample),
    )


def report_rows(
    reports: Sequence[EvalReport], micro: bool = False
) -> list[tuple[str, float, float]]:
    """(name, cer, wer) rows for rendering, one per report."""
    if micro:
        return [(r.engine_name, r.micro_cer, r.micro_wer) for r in reports]
    return [(r.engine_name, r.macro_cer, r.macro_wer) for r in reports]


def to_tsv(rows: Sequence[tuple[str, float, float]], decimals: int = 2) -> str:
    """Delimited report: one ``name\\tcer\\twer`` line per row."""
    lines = ["name\tcer\twer"]
    for name, cer, wer in rows:
        lines.append(f"{name}\t{cer:.{decimals}f}\t{wer:.{decimals}f}")
    return "\n".join(lines) + "\n"


def render_table(rows: Sequence[tuple[str, float, float]], decimals: int = 2) -> str:
    """Human-readable rows in the ``name CER% WER%`` shape."""
    width = max(len(name) for name, _, _ in rows)
    lines = []
    for name, cer, wer in rows:
        lines.append(f"{name:<{width}}  {cer:.{decimals}f}%  {wer:.{decimals}f}%")
    return "\n".join(lines) + "\n"


def report_to_json(report: EvalReport) -> str:
    """Serialize a report, mirroring the EvalReport structure."""
    doc = {
        "engine_name": report.engine_name,
        "dataset_name": report.dataset_name,
        "macro_cer": report.macro_cer,
        "macro_wer": report.macro_wer,
        "micro_cer": report.micro_cer,
        "micro_wer": report.micro_wer,
        "per_sample": [
            {
                "id": s.sample_id,
                "cer": s.cer,
                "wer": s.wer,
                "char_counts": list(s.char_counts),
                "word_counts": list(s.word_counts),
            }
            for s in report.per_sample
        ],
    }
    return json.dumps(doc, ensure_ascii=False, indent=2)
