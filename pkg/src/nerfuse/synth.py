"""Synthetic corpora with planted label relations for end-to-end verification.

A latent set of concepts drives everything.  Each dataset partitions (a
subset of) the concepts into labels, so the true relation between any
source/target label pair follows from set algebra on their concept sets.
A confusion matrix over concepts plays the role of an imperfect
source-trained model: the oracle predictor re-labels every gold span at
its exact boundaries with the source dataset's label of a concept drawn
from the true concept's confusion row.  That makes the expected empirical
similarity of every label pair available in closed form, so the whole
similarity-and-merge pipeline can be checked against analytic values.

Entity tokens encode their concept (first token ``E=<concept>``), which
keeps the oracle applicable to concatenations of generated corpora.  All
generation is deterministic given the spec seed; every artifact draws
from its own seed stream, so artifacts can be produced in any order.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, EntitySpan, Sentence, serialize_bio
from .empirical import PredictionSet, serialize_predictions_jsonl
from .errors import ParseError, ValidationError
from .semantic import EmbeddingEntry, EmbeddingSet, serialize_embeddings_jsonl

__all__ = [
    "SynthSpec",
    "GroundTruth",
    "gen_corpora",
    "oracle_predict",
    "expected_empirical",
    "gen_embeddings",
    "span_concept",
    "write_artifacts",
]

RELATIONS = ("equivalence", "subset", "superset", "partial_overlap", "disjoint")


@dataclass(frozen=True)
class SynthSpec:
    """Generator parameters: concepts, per-dataset label partitions, noise."""

    concepts: tuple[str, ...]
    partitions: dict[str, dict[str, frozenset[str]]]
    confusion: dict[str, dict[str, float]]
    spans_per_label: int = 50
    embedding_dim: int = 16
    cluster_sigma: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if not self.concepts:
            raise ValidationError("spec needs at least one concept")
        known = set(self.concepts)
        if len(known) != len(self.concepts):
            raise ValidationError("concept ids must be unique")
        for c in self.concepts:
            if not c or c != "".join(c.split()) or "=" in c:
                raise ValidationError(f"concept id {c!r} must be non-empty, without whitespace or '='")
        normalized: dict[str, dict[str, frozenset[str]]] = {}
        for dataset, labels in self.partitions.items():
            if not labels:
                raise ValidationError(f"dataset {dataset!r} has no labels")
            claimed: set[str] = set()
            normalized[dataset] = {}
            for label, concepts in labels.items():
                concepts = frozenset(concepts)
                if not concepts:
                    raise ValidationError(f"label {label!r} of {dataset!r} covers no concepts")
                if not concepts <= known:
                    raise ValidationError(
                        f"label {label!r} of {dataset!r} uses unknown concepts {sorted(concepts - known)}"
                    )
                if claimed & concepts:
                    raise ValidationError(
                        f"labels of dataset {dataset!r} must cover disjoint concept sets"
                    )
                claimed |= concepts
                normalized[dataset][label] = concepts
        object.__setattr__(self, "partitions", normalized)
        for c in self.concepts:
            row = self.confusion.get(c)
            if row is None:
                raise ValidationError(f"confusion matrix misses a row for concept {c!r}")
            if not set(row) <= known:
                raise ValidationError(f"confusion row {c!r} names unknown concepts")
            total = sum(row.values())
            if abs(total - 1.0) > 1e-9:
                raise ValidationError(f"confusion row {c!r} sums to {total}, expected 1")
            if any(p < 0 for p in row.values()):
                raise ValidationError(f"confusion row {c!r} has negative probabilities")
        if self.spans_per_label < 1:
            raise ValidationError("spans_per_label must be >= 1")
        if self.embedding_dim < 1:
            raise ValidationError("embedding_dim must be >= 1")
        if self.cluster_sigma < 0:
            raise ValidationError("cluster_sigma must be >= 0")

    @classmethod
    def from_json(cls, text: str) -> "SynthSpec":
        try:
            payload = json.loads(text)
            return cls(
                concepts=tuple(payload["concepts"]),
                partitions={
                    ds: {label: frozenset(concepts) for label, concepts in labels.items()}
                    for ds, labels in payload["partitions"].items()
                },
                confusion={
                    c: {c2: float(p) for c2, p in row.items()}
                    for c, row in payload["confusion"].items()
                },
                spans_per_label=int(payload.get("spans_per_label", 50)),
                embedding_dim=int(payload.get("embedding_dim", 16)),
                cluster_sigma=float(payload.get("cluster_sigma", 0.1)),
                seed=int(payload.get("seed", 0)),
            )
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"invalid synth spec file: {exc}") from exc

    def to_json(self) -> str:
        payload = {
            "concepts": list(self.concepts),
            "partitions": {
                ds: {label: sorted(concepts) for label, concepts in labels.items()}
                for ds, labels in self.partitions.items()
            },
            "confusion": self.confusion,
            "spans_per_label": self.spans_per_label,
            "embedding_dim": self.embedding_dim,
            "cluster_sigma": self.cluster_sigma,
            "seed": self.seed,
        }
        return json.dumps(payload, ensure_ascii=False, indent=2)


@dataclass(frozen=True)
class GroundTruth:
    """Planted label relations per ordered dataset pair, from concept-set algebra."""

    relations: dict[tuple[str, str], dict[tuple[str, str], str]]

    def relation(self, source_dataset, target_dataset, source_label, target_label) -> str:
        return self.relations[(source_dataset, target_dataset)][(source_label, target_label)]

    def to_json(self) -> str:
        payload = {
            f"{ds}->{dt}": {
                f"{ls}->{lt}": rel for (ls, lt), rel in sorted(pairs.items())
            }
            for (ds, dt), pairs in sorted(self.relations.items())
        }
        return json.dumps(payload, ensure_ascii=False, indent=2)


def _rng(seed: int, *tags) -> np.random.Generator:
    digest = hashlib.sha256(":".join(str(t) for t in tags).encode("utf-8")).digest()
    entropy = [seed & 0xFFFFFFFF] + [
        int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)
    ]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _relation(source_concepts: frozenset, target_concepts: frozenset) -> str:
    if source_concepts == target_concepts:
        return "equivalence"
    if source_concepts < target_concepts:
        return "subset"
    if source_concepts > target_concepts:
        return "superset"
    if source_concepts & target_concepts:
        return "partial_overlap"
    return "disjoint"


def ground_truth(spec: SynthSpec) -> GroundTruth:
    relations = {}
    for ds, source_labels in spec.partitions.items():
        for dt, target_labels in spec.partitions.items():
            if ds == dt:
                continue
            relations[(ds, dt)] = {
                (ls, lt): _relation(cs, ct)
                for ls, cs in source_labels.items()
                for lt, ct in target_labels.items()
            }
    return GroundTruth(relations=relations)


def span_concept(sentence: Sentence, span: EntitySpan) -> str:
    """Recover the latent concept a generated span was sampled from."""
    token = sentence.tokens[span.start]
    if not token.startswith("E="):
        raise ValidationError(
            f"token {token!r} does not encode a concept; not a synthetic corpus?"
        )
    return token[2:]


def gen_corpora(spec: SynthSpec) -> tuple[dict[str, Corpus], GroundTruth]:
    """One corpus per dataset, a single entity span per sentence."""
    corpora = {}
    for dataset in spec.partitions:
        rng = _rng(spec.seed, "corpus", dataset)
        sentences = []
        ordinal = 0
        for label in sorted(spec.partitions[dataset]):
            concepts = sorted(spec.partitions[dataset][label])
            for _ in range(spec.spans_per_label):
                concept = concepts[int(rng.integers(0, len(concepts)))]
                pre = [f"w{int(rng.integers(0, 50))}" for _ in range(int(rng.integers(0, 3)))]
                entity = [f"E={concept}"] + [
                    f"E+{j}" for j in range(int(rng.integers(0, 2)))
                ]
                post = [f"w{int(rng.integers(0, 50))}" for _ in range(int(rng.integers(1, 3)))]
                tokens = tuple(pre + entity + post)
                span = EntitySpan(len(pre), len(pre) + len(entity), label)
                sentences.append(
                    Sentence(id=f"{dataset}:{ordinal}", tokens=tokens, spans=(span,))
                )
                ordinal += 1
        corpora[dataset] = Corpus(name=dataset, sentences=tuple(sentences))
    return corpora, ground_truth(spec)


def _inverse_partition(labels: dict[str, frozenset[str]]) -> dict[str, str]:
    inverse = {}
    for label in sorted(labels):
        for concept in labels[label]:
            inverse[concept] = label
    return inverse


def _predict_with_mapping(
    corpus: Corpus,
    spec: SynthSpec,
    label_concepts: dict[str, frozenset[str]],
    model_tag: str,
    boundary_jitter: float = 0.0,
) -> PredictionSet:
    inverse = _inverse_partition(label_concepts)
    concept_order = list(spec.concepts)
    rows = {
        c: np.array([spec.confusion[c].get(c2, 0.0) for c2 in concept_order])
        for c in concept_order
    }
    rng = _rng(spec.seed, "oracle", model_tag, corpus.name)

    records: dict[str, tuple[EntitySpan, ...]] = {}
    for sentence in corpus.sentences:
        predicted = []
        for span in sentence.spans:
            concept = span_concept(sentence, span)
            drawn = concept_order[int(rng.choice(len(concept_order), p=rows[concept]))]
            label = inverse.get(drawn)
            if label is None:
                continue
            start, end = span.start, span.end
            if boundary_jitter > 0 and rng.random() < boundary_jitter:
                if end < len(sentence.tokens):
                    end += 1
                elif start > 0:
                    start -= 1
            predicted.append(EntitySpan(start, end, label))
        records[sentence.id] = tuple(predicted)
    return PredictionSet(
        source_model_tag=model_tag,
        schema=tuple(sorted(label_concepts)),
        records=records,
    )


def oracle_predict(
    corpus: Corpus,
    spec: SynthSpec,
    source_dataset: str,
    boundary_jitter: float = 0.0,
) -> PredictionSet:
    """Predictions a model trained on ``source_dataset`` would make on ``corpus``.

    Every gold span gets a prediction at the same boundaries whose label
    is the source label of a concept drawn from the true concept's
    confusion row (no prediction when the source schema does not cover the
    drawn concept).  ``boundary_jitter`` optionally perturbs boundaries
    with the given probability, for robustness experiments.
    """
    if source_dataset not in spec.partitions:
        raise ValidationError(f"unknown source dataset {source_dataset!r}")
    return _predict_with_mapping(
        corpus,
        spec,
        spec.partitions[source_dataset],
        model_tag=source_dataset,
        boundary_jitter=boundary_jitter,
    )


def expected_empirical(
    spec: SynthSpec,
    source_dataset: str,
    target_dataset: str,
    source_label: str,
    target_label: str,
) -> float | None:
    """Closed-form expectation of the empirical similarity under the planted model."""
    try:
        source_concepts = spec.partitions[source_dataset][source_label]
    except KeyError:
        raise ValidationError(
            f"label {source_label!r} not in dataset {source_dataset!r}"
        ) from None
    target_labels = spec.partitions.get(target_dataset)
    if target_labels is None or target_label not in target_labels:
        raise ValidationError(f"label {target_label!r} not in dataset {target_dataset!r}")

    def predicted_as_source(concept: str) -> float:
        return sum(spec.confusion[concept].get(c, 0.0) for c in source_concepts)

    def label_mass(label: str) -> float:
        concepts = target_labels[label]
        return spec.spans_per_label * sum(predicted_as_source(c) for c in concepts) / len(concepts)

    numerator = label_mass(target_label)
    denominator = sum(label_mass(label) for label in target_labels)
    if denominator == 0.0:
        return None
    return numerator / denominator


def gen_embeddings(spec: SynthSpec, dataset: str) -> EmbeddingSet:
    """Cluster embeddings: one fixed unit centroid per concept plus Gaussian noise.

    Concept centroids are shared across datasets (they depend only on the
    spec seed), so labels covering the same concepts land in the same
    region of the space regardless of which dataset they come from.
    """
    if dataset not in spec.partitions:
        raise ValidationError(f"unknown dataset {dataset!r}")
    centroid_rng = _rng(spec.seed, "centroids")
    centroids = {}
    for concept in spec.concepts:
        v = centroid_rng.standard_normal(spec.embedding_dim)
        centroids[concept] = v / np.linalg.norm(v)

    rng = _rng(spec.seed, "embed", dataset)
    entries: dict[str, list[EmbeddingEntry]] = {}
    for label in sorted(spec.partitions[dataset]):
        concepts = sorted(spec.partitions[dataset][label])
        vectors = []
        for k in range(spec.spans_per_label):
            concept = concepts[int(rng.integers(0, len(concepts)))]
            noise = rng.standard_normal(spec.embedding_dim) * spec.cluster_sigma
            vectors.append(
                EmbeddingEntry(
                    vector=centroids[concept] + noise,
                    entry_id=f"{dataset}:{label}:{k}",
                    text=f"E={concept}",
                )
            )
        entries[label] = vectors
    return EmbeddingSet(spec.embedding_dim, entries)


def schedule_provider(spec: SynthSpec):
    """(emp_provider, merger) pair for path planning over synthetic corpora.

    The merger concatenates corpora and remembers each intermediate's
    label-to-concepts mapping (union of its parents'; a label claimed by
    both keeps the union of their concept sets, and a concept under
    several labels predicts as the lexicographically smallest).  The
    provider then emulates "train on source, predict on target" for any
    registered corpus, including intermediates.
    """
    from .corpus import concat
    from .empirical import empirical_matrix

    registry: dict[str, dict[str, frozenset[str]]] = {
        ds: dict(spec.partitions[ds]) for ds in spec.partitions
    }

    def merger(source: Corpus, target: Corpus, name: str) -> Corpus:
        merged = concat(source, target, name)[0]
        combined: dict[str, frozenset[str]] = {}
        for mapping in (registry[source.name], registry[target.name]):
            for label, concepts in mapping.items():
                combined[label] = combined.get(label, frozenset()) | concepts
        registry[name] = combined
        return merged

    def emp_provider(source: Corpus, target: Corpus):
        if source.name not in registry:
            raise ValidationError(f"corpus {source.name!r} unknown to the synth provider")
        pred = _predict_with_mapping(
            target, spec, registry[source.name], model_tag=source.name
        )
        return empirical_matrix(pred, target, set(pred.schema), target.schema.labels())

    return emp_provider, merger


def write_artifacts(spec: SynthSpec, out_dir) -> list[str]:
    """Generate and write every artifact; returns the written paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def emit(name: str, text: str):
        path = out / name
        path.write_text(text, encoding="utf-8")
        written.append(str(path))

    corpora, truth = gen_corpora(spec)
    emit("spec.json", spec.to_json())
    emit("ground_truth.json", truth.to_json())
    for dataset in sorted(corpora):
        emit(f"{dataset}.bio", serialize_bio(corpora[dataset]))
        emit(
            f"{dataset}.embeddings.jsonl",
            serialize_embeddings_jsonl(gen_embeddings(spec, dataset), model_tag="synth"),
        )
    for source in sorted(corpora):
        for target in sorted(corpora):
            if source == target:
                continue
            pred = oracle_predict(corpora[target], spec, source)
            emit(f"pred_{source}_on_{target}.jsonl", serialize_predictions_jsonl(pred))
    return written
