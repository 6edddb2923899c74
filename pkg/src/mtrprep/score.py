"""Transcript normalization, word alignment, WER and multi-seed aggregation."""

from __future__ import annotations

import csv
import io
import math
import os
import string
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import (
    DuplicateUtteranceId,
    ColumnMismatch,
    EmptyList,
    EmptyReference,
    MissingUtterance,
    ZeroBaseline,
)

try:
    if os.environ.get("MTRPREP_PURE_PYTHON"):
        raise ImportError
    from ._align_ext import align_ids as _align_ids_ext
except ImportError:  # extension not built
    _align_ids_ext = None

# apostrophes are kept: "don't" and "dont" are different words
DEFAULT_PUNCTUATION = string.punctuation.replace("'", "")


def normalize_transcript(text: str, punctuation: str = DEFAULT_PUNCTUATION) -> list[str]:
    table = str.maketrans("", "", punctuation)
    return text.lower().translate(table).split()


@dataclass(frozen=True)
class AlignmentCounts:
    substitutions: int = 0
    deletions: int = 0
    insertions: int = 0
    correct: int = 0

    @property
    def ref_length(self) -> int:
        return self.substitutions + self.deletions + self.correct

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    def __add__(self, other: "AlignmentCounts") -> "AlignmentCounts":
        return AlignmentCounts(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.correct + other.correct,
        )


def _align_ids_py(ref: Sequence[int], hyp: Sequence[int]):
    m, n = len(ref), len(hyp)
    prev = list(range(n + 1))
    table = [prev]
    for i in range(1, m + 1):
        row = [i] + [0] * n
        r = ref[i - 1]
        for j in range(1, n + 1):
            best = prev[j - 1] + (r != hyp[j - 1])
            if row[j - 1] + 1 < best:
                best = row[j - 1] + 1
            if prev[j] + 1 < best:
                best = prev[j] + 1
            row[j] = best
        table.append(row)
        prev = row
    s = d = ins = c = 0
    i, j = m, n
    while i or j:
        cost = table[i][j]
        if i and j:
            miss = ref[i - 1] != hyp[j - 1]
            if table[i - 1][j - 1] + miss == cost:
                if miss:
                    s += 1
                else:
                    c += 1
                i -= 1
                j -= 1
                continue
        if j and table[i][j - 1] + 1 == cost:
            ins += 1
            j -= 1
            continue
        d += 1
        i -= 1
    return s, d, ins, c


def align(ref: Sequence[str], hyp: Sequence[str], backend: str | None = None) -> AlignmentCounts:
    """Minimum edit distance alignment with unit costs.

    Among equal-cost alignments the one found by tracing back from the end
    while preferring a diagonal step (match or substitution), then an
    insertion, then a deletion is reported, so the individual counts and not
    just their sum are reproducible.
    """
    vocab: dict = {}
    r = [vocab.setdefault(t, len(vocab)) for t in ref]
    h = [vocab.setdefault(t, len(vocab)) for t in hyp]
    if backend == "python" or (backend is None and _align_ids_ext is None):
        counts = _align_ids_py(r, h)
    elif backend in (None, "cython"):
        if _align_ids_ext is None:
            raise ImportError("compiled alignment kernel is not built")
        counts = _align_ids_ext(r, h)
    else:
        raise ValueError(f"unknown alignment backend {backend!r}")
    return AlignmentCounts(*counts)


def wer(counts: AlignmentCounts) -> float:
    """Word error rate in percent; may exceed 100 for insertion-heavy output."""
    if counts.ref_length == 0:
        raise EmptyReference("WER is undefined for an empty reference")
    return 100.0 * counts.errors / counts.ref_length


@dataclass(frozen=True)
class SeedAggregate:
    per_seed_wer: tuple
    mean: float
    std_error: float

    def format(self, digits: int = 2) -> str:
        return f"{self.mean:.{digits}f} ± {self.std_error:.{digits}f}"


def aggregate_seeds(per_seed: Iterable[float], population: bool = False) -> SeedAggregate:
    """Mean and standard error over seeds.

    The standard error uses the sample standard deviation (n - 1) unless
    ``population`` is set; a single seed has zero standard error.
    """
    vals = tuple(float(v) for v in per_seed)
    n = len(vals)
    if n == 0:
        raise EmptyList("no per-seed WERs to aggregate")
    mean = math.fsum(vals) / n
    if n == 1:
        return SeedAggregate(vals, mean, 0.0)
    ss = math.fsum((v - mean) ** 2 for v in vals)
    sd = math.sqrt(ss / (n if population else n - 1))
    return SeedAggregate(vals, mean, sd / math.sqrt(n))


def relative_improvement(base_wer: float, new_wer: float) -> float:
    """Relative WER reduction in percent; negative when ``new_wer`` is worse."""
    if base_wer <= 0:
        raise ZeroBaseline(f"baseline WER must be positive, got {base_wer}")
    return 100.0 * (base_wer - new_wer) / base_wer


# -- corpus scoring ------------------------------------------------------------

def read_transcripts(path) -> dict[str, str]:
    """Read ``id<TAB>...<TAB>transcript`` lines (manifest rows or id/text pairs)."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            if len(fields) == 1:
                # Kaldi style "id word word ..."
                uid, _, text = line.partition(" ")
            else:
                uid, text = fields[0], fields[-1]
            if uid in out:
                raise DuplicateUtteranceId(f"{path}:{lineno}: duplicate utterance id {uid!r}")
            out[uid] = text
    return out


def score_corpus(
    ref: Mapping[str, str],
    hyp: Mapping[str, str],
    missing_as_deletion: bool = False,
) -> AlignmentCounts:
    missing = [uid for uid in ref if uid not in hyp]
    if missing and not missing_as_deletion:
        raise MissingUtterance(
            f"{len(missing)} reference utterance(s) absent from hypothesis, e.g. {missing[0]!r}"
        )
    total = AlignmentCounts()
    for uid in sorted(ref):
        total = total + align(
            normalize_transcript(ref[uid]), normalize_transcript(hyp.get(uid, ""))
        )
    return total


# -- report tables ---------------------------------------------------------------

@dataclass(frozen=True)
class ReportRow:
    model: str
    size: int | None
    results: Mapping[str, SeedAggregate]
    relative: Mapping[str, float] | None = None


class ReportTable:
    def __init__(self, rows: Sequence[ReportRow]):
        rows = list(rows)
        columns: list[str] = list(rows[0].results) if rows else []
        for row in rows:
            if list(row.results) != columns:
                raise ColumnMismatch(
                    f"row {row.model!r} has columns {list(row.results)}, expected {columns}"
                )
        self.rows = rows
        self.columns = columns
        self.has_size = any(r.size is not None for r in rows)
        self.has_relative = any(r.relative for r in rows)

    def _cells(self):
        head = ["Model"] + (["Size"] if self.has_size else []) + self.columns
        if self.has_relative:
            head += [f"{c} rel. %" for c in self.columns]
        body = []
        for r in self.rows:
            cells = [r.model]
            if self.has_size:
                cells.append("" if r.size is None else str(r.size))
            cells += [r.results[c].format() for c in self.columns]
            if self.has_relative:
                rel = r.relative or {}
                cells += [f"{rel[c]:.1f}" if c in rel else "" for c in self.columns]
            body.append(cells)
        return head, body

    def to_text(self) -> str:
        head, body = self._cells()
        widths = [max(len(row[i]) for row in [head] + body) for i in range(len(head))]
        lines = []
        for n, row in enumerate([head] + body):
            lines.append("  ".join(
                cell.ljust(w) if i == 0 else cell.rjust(w)
                for i, (cell, w) in enumerate(zip(row, widths))
            ).rstrip())
            if n == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        head, body = self._cells()
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(head)
        writer.writerows(body)
        return buf.getvalue()


def report_table(rows: Sequence[ReportRow]) -> ReportTable:
    return ReportTable(rows)


def write_report(table: ReportTable, path) -> None:
    path = Path(path)
    text = table.to_csv() if path.suffix == ".csv" else table.to_text()
    path.write_text(text, encoding="utf-8")
