"""Readers/writers for the toolkit's corpus, prediction, and embedding files.

Deliberately self-contained: the adapter talks to the toolkit only
through these formats, so it reimplements the small amount of parsing it
needs instead of importing the toolkit.

BIO files carry no sentence ids; ids are assigned ``<name>:<ordinal>``
with the name defaulting to the file stem, which is the same convention
the toolkit applies when it parses the gold file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


@dataclass
class Sentence:
    id: str
    tokens: list[str]
    spans: list[tuple[int, int, str]]  # (start, end, label), end exclusive


def _spans_from_tags(tags: list[str]) -> list[tuple[int, int, str]]:
    spans = []
    label, start = None, -1
    for i, tag in enumerate(tags):
        keep = tag.startswith("I-") and tag[2:] == label
        if not keep and label is not None:
            spans.append((start, i, label))
            label = None
        if tag.startswith("B-") or (tag.startswith("I-") and not keep):
            label, start = tag[2:], i
    if label is not None:
        spans.append((start, len(tags), label))
    return spans


def tags_from_spans(n_tokens: int, spans) -> list[str]:
    tags = ["O"] * n_tokens
    for start, end, label in spans:
        tags[start] = f"B-{label}"
        for i in range(start + 1, end):
            tags[i] = f"I-{label}"
    return tags


def read_corpus(path, name: str | None = None) -> tuple[str, list[Sentence]]:
    """Read a BIO or span-JSONL corpus (by extension)."""
    p = Path(path)
    corpus_name = name or p.stem
    text = p.read_text(encoding="utf-8")
    if p.suffix in (".jsonl", ".json"):
        sentences = []
        for line in text.split("\n"):
            if not line.strip():
                continue
            record = json.loads(line)
            spans = [(s["start"], s["end"], s["label"]) for s in record["spans"]]
            sentences.append(Sentence(id=record["id"], tokens=list(record["tokens"]), spans=spans))
        return corpus_name, sentences

    sentences = []
    rows: list[tuple[str, str]] = []

    def flush():
        if rows:
            tokens = [t for t, _ in rows]
            tags = [t for _, t in rows]
            sentences.append(
                Sentence(
                    id=f"{corpus_name}:{len(sentences)}",
                    tokens=tokens,
                    spans=_spans_from_tags(tags),
                )
            )
            rows.clear()

    for line in text.split("\n"):
        if not line.strip():
            flush()
            continue
        fields = [f for f in line.split("\t") if f.strip()] if "\t" in line else line.split()
        if len(fields) != 2:
            raise ValueError(f"malformed BIO line in {path}: {line!r}")
        rows.append((fields[0].strip(), fields[1].strip()))
    flush()
    if not sentences:
        raise ValueError(f"no sentences in {path}")
    return corpus_name, sentences


def write_predictions(path, model_tag: str, schema, records: dict[str, list]) -> None:
    """records: sentence id -> [(start, end, label), ...]."""
    lines = [json.dumps({"source_model_tag": model_tag, "schema": sorted(schema)},
                        ensure_ascii=False, separators=(",", ":"))]
    for sid, spans in records.items():
        lines.append(json.dumps(
            {"id": sid,
             "spans": [{"start": s, "end": e, "label": l} for s, e, l in sorted(spans)]},
            ensure_ascii=False, separators=(",", ":"),
        ))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_embeddings(path, dim: int, model_tag: str, entries) -> None:
    """entries: iterable of (label, entry_id, text, vector)."""
    lines = [json.dumps({"dim": dim, "model_tag": model_tag}, separators=(",", ":"))]
    for label, entry_id, text, vector in entries:
        lines.append(json.dumps(
            {"label": label, "id": entry_id, "text": text,
             "vector": [float(x) for x in vector]},
            ensure_ascii=False, separators=(",", ":"),
        ))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
