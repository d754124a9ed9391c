"""NER corpus data model plus lossless parsers and serializers.

Two on-disk formats are supported:

* BIO column files: one ``token<TAB>tag`` pair per line, a blank line
  between sentences, UTF-8, trailing newline.  Space-separated input is
  accepted; output is always tab-separated (the canonical form).
* Span JSONL: one record per line,
  ``{"id": str, "tokens": [str], "spans": [{"start": int, "end": int, "label": str}]}``.

Spans are half-open token intervals ``[start, end)``.  Character-offset
inputs must be converted to token indices before entering the toolkit.
All corpus values are immutable after construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import ParseError, SerializeError, ValidationError

__all__ = [
    "EntitySpan",
    "Sentence",
    "LabelSchema",
    "Corpus",
    "RowIncrementReport",
    "spans_from_bio_tags",
    "bio_tags_from_spans",
    "parse_bio",
    "serialize_bio",
    "parse_spans_jsonl",
    "serialize_spans_jsonl",
    "concat",
    "low_frequency_filter",
]


@dataclass(frozen=True, order=True)
class EntitySpan:
    """A labeled token interval ``[start, end)`` within one sentence."""

    start: int
    end: int
    label: str

    def __post_init__(self):
        if not isinstance(self.start, int) or not isinstance(self.end, int):
            raise ValidationError(f"span bounds must be ints, got {self!r}")
        if not 0 <= self.start < self.end:
            raise ValidationError(f"need 0 <= start < end, got [{self.start}, {self.end})")
        if not self.label or self.label != "".join(self.label.split()):
            raise ValidationError(f"label must be non-empty without whitespace, got {self.label!r}")

    def overlaps(self, other: "EntitySpan") -> bool:
        return self.start < other.end and other.start < self.end


@dataclass(frozen=True)
class Sentence:
    """Tokens plus gold entity spans, identified by a corpus-unique id."""

    id: str
    tokens: tuple[str, ...]
    spans: tuple[EntitySpan, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "spans", tuple(sorted(self.spans)))
        if not self.id:
            raise ValidationError("sentence id must be non-empty")
        if not self.tokens:
            raise ValidationError(f"sentence {self.id!r} has no tokens")
        if any(not isinstance(t, str) or t == "" for t in self.tokens):
            raise ValidationError(f"sentence {self.id!r} has an empty or non-string token")
        n = len(self.tokens)
        prev = None
        for span in self.spans:
            if span.end > n:
                raise ValidationError(
                    f"span {span} exceeds sentence {self.id!r} of {n} tokens"
                )
            if prev is not None and prev.overlaps(span):
                raise ValidationError(
                    f"overlapping spans {prev} and {span} in sentence {self.id!r}"
                )
            prev = span


class LabelSchema:
    """Label -> gold span count, derived deterministically from a corpus."""

    def __init__(self, counts: dict[str, int]):
        for label, count in counts.items():
            if count < 1:
                raise ValidationError(f"schema count for {label!r} must be positive, got {count}")
        self._counts = dict(sorted(counts.items()))

    @classmethod
    def from_sentences(cls, sentences) -> "LabelSchema":
        counts: dict[str, int] = {}
        for sentence in sentences:
            for span in sentence.spans:
                counts[span.label] = counts.get(span.label, 0) + 1
        return cls(counts)

    @property
    def counts(self) -> dict[str, int]:
        return dict(self._counts)

    def labels(self) -> set[str]:
        return set(self._counts)

    def __getitem__(self, label: str) -> int:
        return self._counts[label]

    def __contains__(self, label: str) -> bool:
        return label in self._counts

    def __len__(self) -> int:
        return len(self._counts)

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelSchema) and self._counts == other._counts

    def __repr__(self) -> str:
        return f"LabelSchema({self._counts!r})"


@dataclass(frozen=True)
class Corpus:
    """Named, ordered collection of sentences with a derived label schema."""

    name: str
    sentences: tuple[Sentence, ...]
    schema: LabelSchema = field(init=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if not self.name:
            raise ValidationError("corpus name must be non-empty")
        seen = set()
        for sentence in self.sentences:
            if sentence.id in seen:
                raise ValidationError(f"duplicate sentence id {sentence.id!r} in corpus {self.name!r}")
            seen.add(sentence.id)
        object.__setattr__(self, "schema", LabelSchema.from_sentences(self.sentences))

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def sentence_ids(self) -> set[str]:
        return {s.id for s in self.sentences}

    def by_id(self) -> dict[str, Sentence]:
        return {s.id: s for s in self.sentences}

    def span_count(self) -> int:
        return sum(len(s.spans) for s in self.sentences)


@dataclass(frozen=True)
class RowIncrementReport:
    """Sentence-count growth of a merged corpus relative to its target."""

    target_name: str
    absolute: int
    relative: float


_ORPHAN = "orphan I-{0} tag at token {1}"


def spans_from_bio_tags(tags, repair: str = "lenient") -> list[EntitySpan]:
    """Decode a BIO tag sequence into entity spans.

    ``repair="lenient"`` opens a new span at an I-X tag that has no live
    B-X/I-X run of the same type (real corpora contain such artifacts);
    ``repair="strict"`` raises instead.
    """
    if repair not in ("lenient", "strict"):
        raise ValidationError(f"repair must be 'lenient' or 'strict', got {repair!r}")
    spans: list[EntitySpan] = []
    open_label = None
    open_start = -1

    def close(end):
        nonlocal open_label
        if open_label is not None:
            spans.append(EntitySpan(open_start, end, open_label))
            open_label = None

    for i, tag in enumerate(tags):
        if tag == "O":
            close(i)
        elif tag.startswith("B-") and len(tag) > 2:
            close(i)
            open_label, open_start = tag[2:], i
        elif tag.startswith("I-") and len(tag) > 2:
            if open_label != tag[2:]:
                if repair == "strict":
                    raise ValidationError(_ORPHAN.format(tag[2:], i))
                close(i)
                open_label, open_start = tag[2:], i
        else:
            raise ValidationError(f"invalid BIO tag {tag!r} at token {i}")
    close(len(tags))
    return spans


def bio_tags_from_spans(n_tokens: int, spans) -> list[str]:
    """Encode spans as BIO tags; raises SerializeError on overlap."""
    tags = ["O"] * n_tokens
    for span in sorted(spans):
        if span.end > n_tokens:
            raise SerializeError(f"span {span} exceeds sentence of {n_tokens} tokens")
        if any(tags[i] != "O" for i in range(span.start, span.end)):
            raise SerializeError(f"overlapping spans cannot be encoded as BIO (at {span})")
        tags[span.start] = f"B-{span.label}"
        for i in range(span.start + 1, span.end):
            tags[i] = f"I-{span.label}"
    return tags


def parse_bio(text: str, name: str, repair: str = "lenient") -> Corpus:
    """Parse a BIO column document into a Corpus.

    Each non-blank line must hold exactly ``token`` and ``tag`` separated
    by a tab (preferred) or runs of spaces.  Blank lines separate
    sentences.  Sentence ids are assigned ``<name>:<ordinal>``.
    """
    rows: list[tuple[str, str, int]] = []  # token, tag, line number
    groups: list[list[tuple[str, str, int]]] = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        stripped = line.strip()
        if not stripped:
            if rows:
                groups.append(rows)
                rows = []
            continue
        if "\t" in line:
            fields = [f for f in line.split("\t") if f.strip() != ""]
        else:
            fields = stripped.split()
        if len(fields) != 2:
            raise ParseError(
                f"expected 'token<TAB or space>tag', got {len(fields)} fields", line=lineno
            )
        rows.append((fields[0].strip(), fields[1].strip(), lineno))
    if rows:
        groups.append(rows)
    if not groups:
        raise ParseError("document contains no sentences")

    sentences = []
    for ordinal, group in enumerate(groups):
        tokens = [token for token, _, _ in group]
        tags = [tag for _, tag, _ in group]
        try:
            spans = spans_from_bio_tags(tags, repair=repair)
        except ValidationError as exc:
            raise ParseError(str(exc), line=group[0][2]) from exc
        sentences.append(Sentence(id=f"{name}:{ordinal}", tokens=tuple(tokens), spans=tuple(spans)))
    return Corpus(name=name, sentences=tuple(sentences))


def serialize_bio(corpus: Corpus) -> str:
    """Serialize to the canonical BIO form (tab-separated, trailing newline)."""
    blocks = []
    for sentence in corpus.sentences:
        for token in sentence.tokens:
            if "\t" in token or "\n" in token:
                raise SerializeError(
                    f"token {token!r} in sentence {sentence.id!r} cannot appear in a BIO column file"
                )
        tags = bio_tags_from_spans(len(sentence.tokens), sentence.spans)
        blocks.append("\n".join(f"{tok}\t{tag}" for tok, tag in zip(sentence.tokens, tags)))
    return "\n\n".join(blocks) + "\n"


def parse_spans_jsonl(text: str, name: str) -> Corpus:
    """Parse span-JSONL records into a Corpus; ids come from the records."""
    sentences = []
    seen_ids = set()
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
        if not isinstance(record, dict) or not {"id", "tokens", "spans"} <= set(record):
            raise ParseError("record must have 'id', 'tokens' and 'spans'", line=lineno)
        rid = record["id"]
        if rid in seen_ids:
            raise ParseError("duplicate sentence id", record_id=rid)
        seen_ids.add(rid)
        try:
            spans = tuple(
                EntitySpan(int(s["start"]), int(s["end"]), str(s["label"])) for s in record["spans"]
            )
            sentences.append(Sentence(id=str(rid), tokens=tuple(record["tokens"]), spans=spans))
        except (ValidationError, KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"invalid record: {exc}", record_id=rid) from exc
    if not sentences:
        raise ParseError("document contains no sentences")
    return Corpus(name=name, sentences=tuple(sentences))


def serialize_spans_jsonl(corpus: Corpus) -> str:
    lines = []
    for sentence in corpus.sentences:
        record = {
            "id": sentence.id,
            "tokens": list(sentence.tokens),
            "spans": [
                {"start": s.start, "end": s.end, "label": s.label} for s in sentence.spans
            ],
        }
        lines.append(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
    return "\n".join(lines) + "\n"


def concat(a: Corpus, b: Corpus, new_name: str) -> tuple[Corpus, RowIncrementReport]:
    """Concatenate two corpora; ``b`` is the designated target.

    Sentence ids are re-namespaced with each operand's corpus name (or the
    literal prefixes ``a:``/``b:`` when the names coincide) so they cannot
    collide.  The report carries the absolute sentence increment
    ``|merged| - |b|`` and the relative increment against ``|b|``.
    """
    prefix_a, prefix_b = a.name, b.name
    if prefix_a == prefix_b:
        prefix_a, prefix_b = "a", "b"
    sentences = [replace(s, id=f"{prefix_a}:{s.id}") for s in a.sentences]
    sentences += [replace(s, id=f"{prefix_b}:{s.id}") for s in b.sentences]
    merged = Corpus(name=new_name, sentences=tuple(sentences))
    absolute = len(merged) - len(b)
    if len(b) > 0:
        relative = absolute / len(b)
    else:
        relative = 0.0 if absolute == 0 else float("inf")
    return merged, RowIncrementReport(target_name=b.name, absolute=absolute, relative=relative)


def low_frequency_filter(schema: LabelSchema, min_count: int = 5) -> set[str]:
    """Labels occurring at least ``min_count`` times (pre-filter for rare labels)."""
    if min_count < 1:
        raise ValidationError(f"min_count must be >= 1, got {min_count}")
    return {label for label, count in schema.counts.items() if count >= min_count}
