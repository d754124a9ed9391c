"""Semantic label similarity from contextual entity embeddings.

Pipeline: center the raw vectors, normalize each to unit length, average
per label into a centroid, and score label pairs with cosine similarity.

Centering defaults to GLOBAL: the mean is taken over all vectors of all
labels in play (for a matrix, jointly over both sets).  Per-label
centering is also available, but note it makes each label's vector sum
zero, so centroids degenerate toward noise and single-entity labels hit
zero-norm failures; it exists for fidelity experiments only.

Cosine is computed with the explicit norm division.  A mean of unit
vectors is not itself unit-norm, so the tempting "dot product of unit
vectors" shortcut does not apply to centroids.

Embedding files are JSONL: a header record ``{"dim": int, "model_tag": str}``
followed by ``{"label": str, "id": str, "text": str, "vector": [float, ...]}``
entries.  Vectors are held in 64-bit floats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .empirical import SimilarityMatrix
from .errors import ParseError, ValidationError

__all__ = [
    "EmbeddingEntry",
    "EmbeddingSet",
    "LabelCentroid",
    "center",
    "normalize",
    "centroid",
    "semantic_cell",
    "semantic_matrix",
    "parse_embeddings_jsonl",
    "serialize_embeddings_jsonl",
]

CENTERING_MODES = ("global", "per_label")


@dataclass(frozen=True, eq=False)
class EmbeddingEntry:
    vector: np.ndarray
    entry_id: str = ""
    text: str = ""


class EmbeddingSet:
    """Per-label lists of fixed-dimension embedding vectors."""

    def __init__(self, dim: int, entries: dict[str, list[EmbeddingEntry]]):
        if dim < 1:
            raise ValidationError(f"dim must be positive, got {dim}")
        self.dim = dim
        self.entries: dict[str, tuple[EmbeddingEntry, ...]] = {}
        for label in sorted(entries):
            coerced = []
            for i, entry in enumerate(entries[label]):
                v = np.asarray(entry.vector, dtype=np.float64)
                if v.shape != (dim,):
                    raise ValidationError(
                        f"vector {i} of label {label!r} has shape {v.shape}, expected ({dim},)"
                    )
                if not np.all(np.isfinite(v)):
                    raise ValidationError(f"vector {i} of label {label!r} has non-finite entries")
                coerced.append(EmbeddingEntry(vector=v, entry_id=entry.entry_id, text=entry.text))
            if not coerced:
                raise ValidationError(f"label {label!r} has no embedding vectors")
            self.entries[label] = tuple(coerced)

    def labels(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def vectors(self, label: str) -> np.ndarray:
        """(n, dim) matrix of the label's vectors."""
        return np.stack([e.vector for e in self.entries[label]])

    def all_vectors(self) -> np.ndarray:
        return np.concatenate([self.vectors(label) for label in self.entries])

    def _with_vectors(self, new_vectors: dict[str, np.ndarray]) -> "EmbeddingSet":
        entries = {
            label: [
                EmbeddingEntry(vector=new_vectors[label][i], entry_id=e.entry_id, text=e.text)
                for i, e in enumerate(self.entries[label])
            ]
            for label in self.entries
        }
        return EmbeddingSet(self.dim, entries)


@dataclass(frozen=True, eq=False)
class LabelCentroid:
    label: str
    vector: np.ndarray

    def is_degenerate(self) -> bool:
        return float(np.linalg.norm(self.vector)) == 0.0


def center(embeddings: EmbeddingSet, mode: str = "global", mean: np.ndarray | None = None) -> EmbeddingSet:
    """Subtract a mean vector from every embedding.

    ``global`` uses one mean over all vectors of all labels (``mean`` may
    supply a precomputed one, e.g. the joint mean of two sets);
    ``per_label`` subtracts each label's own mean.
    """
    if mode not in CENTERING_MODES:
        raise ValidationError(f"centering mode must be one of {CENTERING_MODES}, got {mode!r}")
    if mode == "global":
        mu = embeddings.all_vectors().mean(axis=0) if mean is None else np.asarray(mean, dtype=np.float64)
        return embeddings._with_vectors(
            {label: embeddings.vectors(label) - mu for label in embeddings.entries}
        )
    return embeddings._with_vectors(
        {
            label: embeddings.vectors(label) - embeddings.vectors(label).mean(axis=0)
            for label in embeddings.entries
        }
    )


def normalize(embeddings: EmbeddingSet) -> EmbeddingSet:
    """Scale every vector to unit L2 norm; zero vectors are an error."""
    new_vectors = {}
    for label in embeddings.entries:
        matrix = embeddings.vectors(label)
        norms = np.linalg.norm(matrix, axis=1)
        zero = np.nonzero(norms == 0.0)[0]
        if zero.size:
            raise ValidationError(
                f"cannot normalize zero vector (label {label!r}, entry {int(zero[0])})"
            )
        new_vectors[label] = matrix / norms[:, None]
    return embeddings._with_vectors(new_vectors)


def centroid(embeddings: EmbeddingSet, label: str) -> LabelCentroid:
    """Arithmetic mean of a label's (processed) vectors."""
    if label not in embeddings.entries:
        raise ValidationError(f"label {label!r} not in embedding set")
    return LabelCentroid(label=label, vector=embeddings.vectors(label).mean(axis=0))


def semantic_cell(c_s: LabelCentroid, c_t: LabelCentroid) -> float | None:
    """Cosine similarity of two centroids; ``None`` when either is the zero vector."""
    if c_s.vector.shape != c_t.vector.shape:
        raise ValidationError(
            f"centroid dims differ: {c_s.vector.shape} vs {c_t.vector.shape}"
        )
    ns = float(np.linalg.norm(c_s.vector))
    nt = float(np.linalg.norm(c_t.vector))
    if ns == 0.0 or nt == 0.0:
        return None
    value = float(np.dot(c_s.vector, c_t.vector) / (ns * nt))
    # guard against float drift past the cosine bounds
    return min(1.0, max(-1.0, value))


def semantic_matrix(
    e_source: EmbeddingSet, e_target: EmbeddingSet, centering: str = "global"
) -> SimilarityMatrix:
    """All-pairs label cosine similarity between two embedding sets.

    Global mode centers both sets jointly (one mean over the union), so
    inter-label geometry is preserved and the result is symmetric:
    swapping the sets transposes the matrix.
    """
    if e_source.dim != e_target.dim:
        raise ValidationError(f"embedding dims differ: {e_source.dim} vs {e_target.dim}")
    if centering == "global":
        stacked = np.concatenate([e_source.all_vectors(), e_target.all_vectors()])
        mu = stacked.mean(axis=0)
        source = normalize(center(e_source, "global", mean=mu))
        target = normalize(center(e_target, "global", mean=mu))
    else:
        source = normalize(center(e_source, centering))
        target = normalize(center(e_target, centering))

    source_centroids = {label: centroid(source, label) for label in source.labels()}
    target_centroids = {label: centroid(target, label) for label in target.labels()}
    cells = {
        s: {t: semantic_cell(source_centroids[s], target_centroids[t]) for t in target.labels()}
        for s in source.labels()
    }
    return SimilarityMatrix(
        kind="semantic",
        source_labels=source.labels(),
        target_labels=target.labels(),
        cells=cells,
    )


def parse_embeddings_jsonl(text: str) -> tuple[EmbeddingSet, str]:
    """Parse an embedding file; returns the set and the header's model tag."""
    header = None
    entries: dict[str, list[EmbeddingEntry]] = {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        try:
            payload = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line=lineno) from exc
        if header is None:
            if not isinstance(payload, dict) or "dim" not in payload:
                raise ParseError("first record must be a header with 'dim'", line=lineno)
            header = payload
            continue
        try:
            label = str(payload["label"])
            vector = np.asarray(payload["vector"], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"invalid embedding record: {exc}", line=lineno) from exc
        entries.setdefault(label, []).append(
            EmbeddingEntry(
                vector=vector,
                entry_id=str(payload.get("id", "")),
                text=str(payload.get("text", "")),
            )
        )
    if header is None:
        raise ParseError("embedding file is empty")
    if not entries:
        raise ParseError("embedding file has a header but no entries")
    try:
        return EmbeddingSet(int(header["dim"]), entries), str(header.get("model_tag", ""))
    except ValidationError as exc:
        raise ParseError(str(exc)) from exc


def serialize_embeddings_jsonl(embeddings: EmbeddingSet, model_tag: str = "") -> str:
    lines = [
        json.dumps({"dim": embeddings.dim, "model_tag": model_tag}, separators=(",", ":"))
    ]
    for label in embeddings.entries:
        for entry in embeddings.entries[label]:
            record = {
                "label": label,
                "id": entry.entry_id,
                "text": entry.text,
                "vector": [float(x) for x in entry.vector],
            }
            lines.append(json.dumps(record, ensure_ascii=False, separators=(",", ":")))
    return "\n".join(lines) + "\n"
