"""Asymmetric empirical label similarity from cross-dataset predictions.

A model trained on a source dataset is run over a target corpus; the
similarity of source label ``L_s`` to target label ``L_t`` is the
fraction of spans predicted as ``L_s`` whose boundaries coincide exactly
with a gold span labeled ``L_t``.  The measure is direction-dependent:
reversing source and target generally yields a different matrix.

Predictions arrive as files; this module never invokes a model.  The
prediction file is JSONL with a header record
``{"source_model_tag": str, "schema": [str]}`` followed by
``{"id": str, "spans": [{"start": int, "end": int, "label": str}]}``
records keyed to the target corpus sentence ids.

Undefined cells (zero predictions of a source label) are held as ``None``
throughout and exported as JSON ``null``; they are never silently zero.
Only ``matrix_sum`` excludes them, because path planning works on sums of
the defined mass.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass

from .corpus import Corpus, EntitySpan
from .errors import ParseError, ValidationError

__all__ = [
    "PredictionSet",
    "SimilarityMatrix",
    "empirical_cell",
    "empirical_matrix",
    "matrix_sum",
    "parse_predictions_jsonl",
    "serialize_predictions_jsonl",
]

MATRIX_KINDS = ("empirical", "semantic", "merged")


@dataclass(frozen=True)
class PredictionSet:
    """Predicted spans per sentence id, labeled from the source schema."""

    source_model_tag: str
    schema: tuple[str, ...]
    records: dict[str, tuple[EntitySpan, ...]]

    def __post_init__(self):
        declared = set(self.schema)
        normalized: dict[str, tuple[EntitySpan, ...]] = {}
        for sid, spans in self.records.items():
            ordered = tuple(sorted(spans))
            prev = None
            for span in ordered:
                if span.label not in declared:
                    raise ValidationError(
                        f"predicted label {span.label!r} not in declared schema "
                        f"(sentence {sid!r})"
                    )
                if prev is not None and prev.overlaps(span):
                    raise ValidationError(
                        f"overlapping predicted spans {prev} and {span} in sentence {sid!r}"
                    )
                prev = span
            normalized[sid] = ordered
        object.__setattr__(self, "records", normalized)

    def span_count(self) -> int:
        return sum(len(s) for s in self.records.values())


@dataclass(frozen=True)
class SimilarityMatrix:
    """(source label x target label) score grid with explicit undefined cells.

    ``cells[source][target]`` is a float or ``None`` (undefined).
    Empirical cells live in [0, 1]; semantic and merged cells in [-1, 1].
    """

    kind: str
    source_labels: tuple[str, ...]
    target_labels: tuple[str, ...]
    cells: dict[str, dict[str, float | None]]

    def __post_init__(self):
        if self.kind not in MATRIX_KINDS:
            raise ValidationError(f"matrix kind must be one of {MATRIX_KINDS}, got {self.kind!r}")
        if set(self.cells) != set(self.source_labels):
            raise ValidationError("cell rows do not match source labels")
        lo = 0.0 if self.kind == "empirical" else -1.0
        for s in self.source_labels:
            row = self.cells[s]
            if set(row) != set(self.target_labels):
                raise ValidationError(f"cell columns for {s!r} do not match target labels")
            for t, value in row.items():
                if value is None:
                    continue
                if not lo - 1e-12 <= value <= 1.0 + 1e-12:
                    raise ValidationError(
                        f"{self.kind} cell ({s!r}, {t!r}) = {value} outside [{lo}, 1]"
                    )

    def cell(self, source: str, target: str) -> float | None:
        return self.cells[source][target]

    def defined_items(self):
        for s in self.source_labels:
            for t in self.target_labels:
                value = self.cells[s][t]
                if value is not None:
                    yield s, t, value

    def to_json(self) -> str:
        payload = {
            "kind": self.kind,
            "source_labels": list(self.source_labels),
            "target_labels": list(self.target_labels),
            "cells": {s: {t: self.cells[s][t] for t in self.target_labels}
                      for s in self.source_labels},
        }
        return json.dumps(payload, ensure_ascii=False, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SimilarityMatrix":
        try:
            payload = json.loads(text)
            return cls(
                kind=payload["kind"],
                source_labels=tuple(payload["source_labels"]),
                target_labels=tuple(payload["target_labels"]),
                cells={
                    s: {t: (None if v is None else float(v)) for t, v in row.items()}
                    for s, row in payload["cells"].items()
                },
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"invalid similarity matrix file: {exc}") from exc

    def to_csv(self) -> str:
        """CSV export; undefined cells render as empty fields."""
        out = io.StringIO()
        out.write("source\\target," + ",".join(self.target_labels) + "\n")
        for s in self.source_labels:
            row = [
                "" if self.cells[s][t] is None else repr(self.cells[s][t])
                for t in self.target_labels
            ]
            out.write(s + "," + ",".join(row) + "\n")
        return out.getvalue()


def _check_alignment(pred: PredictionSet, gold: Corpus):
    unknown = set(pred.records) - gold.sentence_ids()
    if unknown:
        raise ValidationError(
            f"prediction sentence ids not in gold corpus: {sorted(unknown)[:5]}"
        )


def _coincidence_counts(pred: PredictionSet, gold: Corpus):
    """Per source label: total predictions and boundary-coincidence counts per gold label."""
    gold_spans_by_id = {s.id: {(sp.start, sp.end): sp.label for sp in s.spans} for s in gold.sentences}
    totals: dict[str, int] = {}
    hits: dict[str, dict[str, int]] = {}
    for sid, spans in pred.records.items():
        gold_here = gold_spans_by_id[sid]
        for span in spans:
            totals[span.label] = totals.get(span.label, 0) + 1
            gold_label = gold_here.get((span.start, span.end))
            if gold_label is not None:
                row = hits.setdefault(span.label, {})
                row[gold_label] = row.get(gold_label, 0) + 1
    return totals, hits


def empirical_cell(pred: PredictionSet, gold: Corpus, source_label: str, target_label: str):
    """One empirical similarity cell, or ``None`` when nothing was predicted as the source label.

    Numerator: predicted spans labeled ``source_label`` whose (sentence id,
    start, end) coincide with a gold span labeled ``target_label``.
    Denominator: all predicted spans labeled ``source_label``.
    """
    if source_label not in pred.schema:
        raise ValidationError(f"source label {source_label!r} not in prediction schema")
    if target_label not in gold.schema:
        raise ValidationError(f"target label {target_label!r} not in gold schema")
    _check_alignment(pred, gold)
    totals, hits = _coincidence_counts(pred, gold)
    denominator = totals.get(source_label, 0)
    if denominator == 0:
        return None
    return hits.get(source_label, {}).get(target_label, 0) / denominator


def empirical_matrix(
    pred: PredictionSet,
    gold: Corpus,
    retained_source_labels,
    retained_target_labels,
) -> SimilarityMatrix:
    """Empirical similarity over all retained (source, target) label pairs.

    Retained label sets normally come from ``low_frequency_filter``; axes
    are emitted in sorted order for determinism.
    """
    source_labels = tuple(sorted(retained_source_labels))
    target_labels = tuple(sorted(retained_target_labels))
    for label in source_labels:
        if label not in pred.schema:
            raise ValidationError(f"source label {label!r} not in prediction schema")
    for label in target_labels:
        if label not in gold.schema:
            raise ValidationError(f"target label {label!r} not in gold schema")
    _check_alignment(pred, gold)
    totals, hits = _coincidence_counts(pred, gold)
    cells: dict[str, dict[str, float | None]] = {}
    for s in source_labels:
        denominator = totals.get(s, 0)
        row: dict[str, float | None] = {}
        for t in target_labels:
            if denominator == 0:
                row[t] = None
            else:
                row[t] = hits.get(s, {}).get(t, 0) / denominator
        cells[s] = row
    return SimilarityMatrix(
        kind="empirical", source_labels=source_labels, target_labels=target_labels, cells=cells
    )


def matrix_sum(matrix: SimilarityMatrix) -> float:
    """Sum of the defined cells of an empirical matrix; undefined cells contribute 0.

    Uses exact summation so the result is independent of axis order.
    """
    if matrix.kind != "empirical":
        raise ValidationError(f"matrix_sum expects an empirical matrix, got kind {matrix.kind!r}")
    return math.fsum(value for _, _, value in matrix.defined_items())


def parse_predictions_jsonl(text: str) -> PredictionSet:
    """Parse a prediction file: header record then one record per sentence."""
    header = None
    records: dict[str, tuple[EntitySpan, ...]] = {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
        if header is None:
            if not isinstance(payload, dict) or "source_model_tag" not in payload or "schema" not in payload:
                raise ParseError(
                    "first record must be a header with 'source_model_tag' and 'schema'",
                    line=lineno,
                )
            header = payload
            continue
        rid = payload.get("id")
        if rid is None:
            raise ParseError("prediction record must have an 'id'", line=lineno)
        if rid in records:
            raise ParseError("duplicate prediction id", record_id=rid)
        try:
            spans = tuple(
                EntitySpan(int(s["start"]), int(s["end"]), str(s["label"]))
                for s in payload.get("spans", [])
            )
        except (ValidationError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"invalid prediction record: {exc}", record_id=rid) from exc
        records[str(rid)] = spans
    if header is None:
        raise ParseError("prediction file is empty")
    try:
        return PredictionSet(
            source_model_tag=str(header["source_model_tag"]),
            schema=tuple(header["schema"]),
            records=records,
        )
    except ValidationError as exc:
        raise ParseError(str(exc)) from exc


def serialize_predictions_jsonl(pred: PredictionSet) -> str:
    lines = [
        json.dumps(
            {"source_model_tag": pred.source_model_tag, "schema": list(pred.schema)},
            ensure_ascii=False,
            separators=(",", ":"),
        )
    ]
    for sid in pred.records:
        spans = [
            {"start": s.start, "end": s.end, "label": s.label} for s in pred.records[sid]
        ]
        lines.append(
            json.dumps({"id": sid, "spans": spans}, ensure_ascii=False, separators=(",", ":"))
        )
    return "\n".join(lines) + "\n"
