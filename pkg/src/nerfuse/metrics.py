"""Span-level precision/recall/F1 with per-label report tables.

Matching is exact: a predicted span is a true positive iff a gold span
has the identical (sentence id, start, end, label) tuple.  Zero
denominators follow the usual conventions (precision 0 when nothing was
predicted, recall 0 when there is no gold, F1 0 when P + R = 0) so
reports never contain undefined cells.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import ValidationError

__all__ = [
    "Counts",
    "MatchCounts",
    "LabelReport",
    "match_spans",
    "prf1",
    "micro_f1",
    "label_report",
    "report_to_json",
    "report_to_text",
]


@dataclass(frozen=True)
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


@dataclass(frozen=True)
class MatchCounts:
    """TP/FP/FN per label; ``pooled()`` gives the global counts."""

    per_label: dict[str, Counts]

    def pooled(self) -> Counts:
        total = Counts()
        for counts in self.per_label.values():
            total = total + counts
        return total


def match_spans(gold, pred) -> MatchCounts:
    """Count exact span matches between a gold corpus and a prediction set.

    Every predicted sentence id must exist in the gold corpus.  Gold and
    predicted spans are non-overlapping within a sentence, so exact-tuple
    matching is automatically one-to-one.
    """
    gold_by_id = gold.by_id()
    per_label: dict[str, Counts] = {}

    def bump(label, tp=0, fp=0, fn=0):
        c = per_label.get(label, Counts())
        per_label[label] = Counts(c.tp + tp, c.fp + fp, c.fn + fn)

    for sid in pred.records:
        if sid not in gold_by_id:
            raise ValidationError(f"prediction sentence id {sid!r} not present in gold corpus")

    for sentence in gold.sentences:
        gold_set = set(sentence.spans)
        pred_set = set(pred.records.get(sentence.id, ()))
        for span in pred_set:
            if span in gold_set:
                bump(span.label, tp=1)
            else:
                bump(span.label, fp=1)
        for span in gold_set - pred_set:
            bump(span.label, fn=1)
    return MatchCounts(per_label=per_label)


def prf1(counts: Counts) -> tuple[float, float, float]:
    """Precision, recall, F1 from raw counts (zero-denominator safe)."""
    precision = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    recall = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def micro_f1(counts) -> float:
    """Micro-averaged F1: 2*sum(TP) / (2*sum(TP) + sum(FP) + sum(FN)).

    Accepts a MatchCounts, a per-label dict, or a pooled Counts.
    """
    if isinstance(counts, MatchCounts):
        pooled = counts.pooled()
    elif isinstance(counts, dict):
        pooled = MatchCounts(per_label=counts).pooled()
    else:
        pooled = counts
    denom = 2 * pooled.tp + pooled.fp + pooled.fn
    return 2 * pooled.tp / denom if denom else 0.0


@dataclass(frozen=True)
class LabelReport:
    """Per-label precision/recall/F1/support plus pooled micro-F1."""

    rows: dict[str, dict[str, float]]
    micro_f1: float


def label_report(gold, pred) -> LabelReport:
    counts = match_spans(gold, pred)
    rows = {}
    for label in sorted(counts.per_label):
        c = counts.per_label[label]
        p, r, f1 = prf1(c)
        rows[label] = {
            "precision": p,
            "recall": r,
            "f1": f1,
            "support": c.tp + c.fn,
        }
    return LabelReport(rows=rows, micro_f1=micro_f1(counts))


def report_to_json(report: LabelReport) -> str:
    return json.dumps(
        {"per_label": report.rows, "micro_f1": report.micro_f1},
        ensure_ascii=False,
        indent=2,
        sort_keys=True,
    )


def report_to_text(report: LabelReport) -> str:
    """Aligned-column table: label, f1, support, with a micro-F1 footer."""
    labels = list(report.rows)
    width = max([len("label")] + [len(x) for x in labels])
    lines = [f"{'label':<{width}}  {'f1':>6}  {'support':>7}"]
    for label in labels:
        row = report.rows[label]
        lines.append(f"{label:<{width}}  {row['f1']:>6.4f}  {row['support']:>7d}")
    lines.append(f"{'micro_f1':<{width}}  {report.micro_f1:>6.4f}  {'':>7}")
    return "\n".join(lines) + "\n"
