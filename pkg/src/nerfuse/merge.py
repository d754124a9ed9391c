"""Similarity fusion, label mapping plans, relabeling, and pseudo-label injection.

The fused score of a label pair is the linear interpolation
``(1 - lambda) * semantic + lambda * empirical``.  A mapping plan gates
pairs on a threshold tau and assigns each source label to at most one
target label (maximum fused score first; ties fall back to the higher
empirical score, then to the lexicographically smaller target).  Several
source labels may fan in to one target.  Sources with no candidate above
the threshold stay unmapped (disjointness).

Undefined inputs propagate by default: a pair with either similarity
undefined gets no fused score and cannot be merged.  The optional
semantic-fallback mode substitutes the defined side at full weight, for
settings where too little is annotated to estimate empirical similarity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from ._validation import check_choice, check_unit_interval
from .corpus import Corpus, EntitySpan, concat
from .empirical import PredictionSet, SimilarityMatrix
from .errors import ParseError, ValidationError

__all__ = [
    "Mapping",
    "MergePlan",
    "MergeReport",
    "InjectionReport",
    "RELATION_HINTS",
    "merged_cell",
    "merged_matrix",
    "build_plan",
    "classify_relation",
    "apply_plan",
    "merge_datasets",
    "augment_labels",
    "plan_to_json",
    "plan_from_json",
]

RELATION_HINTS = ("equivalence", "subset_superset", "partial_overlap")
UNMAPPED_POLICIES = ("retain", "drop_to_O")
DEFAULT_EQUIVALENCE_BAND = 0.85


@dataclass(frozen=True)
class Mapping:
    source_label: str
    target_label: str
    s_merge: float
    s_empirical: float | None
    s_semantic: float | None
    relation_hint: str


@dataclass(frozen=True)
class MergePlan:
    """Accepted source -> target mappings for one (lambda, tau) setting."""

    lam: float
    tau: float
    mappings: tuple[Mapping, ...]
    unmapped_source_labels: tuple[str, ...]

    def __post_init__(self):
        seen = set()
        for m in self.mappings:
            if m.source_label in seen:
                raise ValidationError(f"source label {m.source_label!r} mapped twice")
            seen.add(m.source_label)
            if m.s_merge < self.tau:
                raise ValidationError(
                    f"mapping {m.source_label!r}->{m.target_label!r} has s_merge below tau"
                )
            if m.relation_hint not in RELATION_HINTS:
                raise ValidationError(f"unknown relation hint {m.relation_hint!r}")

    def as_dict(self) -> dict[str, str]:
        return {m.source_label: m.target_label for m in self.mappings}


@dataclass(frozen=True)
class MergeReport:
    """Provenance of one pairwise dataset merge."""

    source_name: str
    target_name: str
    merged_label_count: int
    row_increment_abs: int
    row_increment_rel: float
    mappings: tuple[Mapping, ...]
    unmapped_source_labels: tuple[str, ...]


@dataclass(frozen=True)
class InjectionReport:
    """Per-label outcome of pseudo-label augmentation."""

    injected: dict[str, int]
    discarded_overlap: dict[str, int]
    discarded_unrequested: dict[str, int]


def merged_cell(
    s_semantic: float | None,
    s_empirical: float | None,
    lam: float,
    fallback: bool = False,
) -> float | None:
    """Fused similarity ``(1 - lam) * semantic + lam * empirical``.

    Returns ``None`` if either input is undefined, unless ``fallback``
    substitutes the defined one at full weight.
    """
    lam = check_unit_interval(lam, "lambda")
    if s_semantic is None and s_empirical is None:
        return None
    if s_semantic is None or s_empirical is None:
        if not fallback:
            return None
        return s_semantic if s_empirical is None else s_empirical
    return (1.0 - lam) * s_semantic + lam * s_empirical


def _check_axes(sem: SimilarityMatrix, emp: SimilarityMatrix):
    if sem.kind != "semantic" or emp.kind != "empirical":
        raise ValidationError(
            f"expected (semantic, empirical) matrices, got ({sem.kind!r}, {emp.kind!r})"
        )
    if set(sem.source_labels) != set(emp.source_labels) or set(sem.target_labels) != set(
        emp.target_labels
    ):
        raise ValidationError("semantic and empirical matrices do not share label axes")


def merged_matrix(
    sem: SimilarityMatrix, emp: SimilarityMatrix, lam: float, fallback: bool = False
) -> SimilarityMatrix:
    """Cell-wise fusion of a semantic and an empirical matrix."""
    _check_axes(sem, emp)
    source_labels = tuple(sorted(sem.source_labels))
    target_labels = tuple(sorted(sem.target_labels))
    cells = {
        s: {
            t: merged_cell(sem.cell(s, t), emp.cell(s, t), lam, fallback=fallback)
            for t in target_labels
        }
        for s in source_labels
    }
    return SimilarityMatrix(
        kind="merged", source_labels=source_labels, target_labels=target_labels, cells=cells
    )


def classify_relation(
    s_merge: float, fan_in_count: int, equivalence_band: float = DEFAULT_EQUIVALENCE_BAND
) -> str:
    """Advisory relation hint for an accepted mapping (never a gate)."""
    if s_merge >= equivalence_band:
        return "equivalence"
    if fan_in_count > 1:
        return "subset_superset"
    return "partial_overlap"


def build_plan(
    sem: SimilarityMatrix,
    emp: SimilarityMatrix,
    lam: float,
    tau: float,
    fallback: bool = False,
    equivalence_band: float = DEFAULT_EQUIVALENCE_BAND,
) -> MergePlan:
    """Threshold-gated maximum-priority mapping plan.

    For each source label the candidate targets are those with a defined
    fused score >= tau; the winner maximizes the fused score, tie-broken
    by higher empirical score and then lexicographic target label.
    Fan-in is allowed; a source label never maps to more than one target.
    """
    lam = check_unit_interval(lam, "lambda")
    tau = check_unit_interval(tau, "tau")
    _check_axes(sem, emp)

    chosen: list[tuple[str, str, float, float | None, float | None]] = []
    unmapped: list[str] = []
    for source in sorted(sem.source_labels):
        best = None
        for target in sorted(sem.target_labels):
            s_sem = sem.cell(source, target)
            s_emp = emp.cell(source, target)
            fused = merged_cell(s_sem, s_emp, lam, fallback=fallback)
            if fused is None or fused < tau:
                continue
            # higher fused score wins; then higher empirical; then smaller target label
            emp_key = s_emp if s_emp is not None else float("-inf")
            key = (-fused, -emp_key, target)
            if best is None or key < best[0]:
                best = (key, target, fused, s_emp, s_sem)
        if best is None:
            unmapped.append(source)
        else:
            _, target, fused, s_emp, s_sem = best
            chosen.append((source, target, fused, s_emp, s_sem))

    fan_in: dict[str, int] = {}
    for _, target, _, _, _ in chosen:
        fan_in[target] = fan_in.get(target, 0) + 1
    mappings = tuple(
        Mapping(
            source_label=source,
            target_label=target,
            s_merge=fused,
            s_empirical=s_emp,
            s_semantic=s_sem,
            relation_hint=classify_relation(fused, fan_in[target], equivalence_band),
        )
        for source, target, fused, s_emp, s_sem in chosen
    )
    return MergePlan(lam=lam, tau=tau, mappings=mappings, unmapped_source_labels=tuple(unmapped))


def apply_plan(source: Corpus, plan: MergePlan, unmapped_policy: str = "retain") -> Corpus:
    """Relabel a corpus according to a plan.

    Mapped labels are rewritten to their targets; unmapped labels are kept
    verbatim (default) or their spans removed (``drop_to_O``).  Sentences
    and tokens are untouched.
    """
    check_choice(unmapped_policy, "unmapped_policy", UNMAPPED_POLICIES)
    table = plan.as_dict()
    missing = set(table) - source.schema.labels()
    if missing:
        raise ValidationError(f"plan maps labels absent from source schema: {sorted(missing)}")

    sentences = []
    for sentence in source.sentences:
        spans = []
        for span in sentence.spans:
            if span.label in table:
                spans.append(replace(span, label=table[span.label]))
            elif unmapped_policy == "retain":
                spans.append(span)
        sentences.append(replace(sentence, spans=tuple(spans)))
    return Corpus(name=source.name, sentences=tuple(sentences))


def merge_datasets(
    source: Corpus,
    target: Corpus,
    plan: MergePlan,
    new_name: str | None = None,
    unmapped_policy: str = "retain",
) -> tuple[Corpus, MergeReport]:
    """Relabel the source with the plan and concatenate it onto the target."""
    relabeled = apply_plan(source, plan, unmapped_policy=unmapped_policy)
    merged, increment = concat(relabeled, target, new_name or f"{target.name}M")
    report = MergeReport(
        source_name=source.name,
        target_name=target.name,
        merged_label_count=len(plan.mappings),
        row_increment_abs=increment.absolute,
        row_increment_rel=increment.relative,
        mappings=plan.mappings,
        unmapped_source_labels=plan.unmapped_source_labels,
    )
    return merged, report


def augment_labels(
    target: Corpus, pseudo: PredictionSet, labels_to_inject: set[str]
) -> tuple[Corpus, InjectionReport]:
    """Add pseudo-label spans for labels the target schema lacks.

    Only pseudo spans whose label was requested AND which overlap no
    existing gold span are promoted to gold; everything else is discarded
    and counted.  Gold spans are never modified or removed.
    """
    labels_to_inject = set(labels_to_inject)
    already = labels_to_inject & target.schema.labels()
    if already:
        raise ValidationError(
            f"labels already present in target schema cannot be injected: {sorted(already)}"
        )
    unknown = set(pseudo.records) - target.sentence_ids()
    if unknown:
        raise ValidationError(
            f"pseudo-label sentence ids not in target corpus: {sorted(unknown)[:5]}"
        )

    injected: dict[str, int] = {}
    discarded_overlap: dict[str, int] = {}
    discarded_unrequested: dict[str, int] = {}

    def bump(table, label):
        table[label] = table.get(label, 0) + 1

    sentences = []
    for sentence in target.sentences:
        additions: list[EntitySpan] = []
        for span in pseudo.records.get(sentence.id, ()):
            if span.end > len(sentence.tokens):
                raise ValidationError(
                    f"pseudo span {span} exceeds sentence {sentence.id!r} "
                    f"of {len(sentence.tokens)} tokens"
                )
            if span.label not in labels_to_inject:
                bump(discarded_unrequested, span.label)
            elif any(span.overlaps(g) for g in sentence.spans):
                bump(discarded_overlap, span.label)
            else:
                additions.append(span)
                bump(injected, span.label)
        if additions:
            sentences.append(replace(sentence, spans=sentence.spans + tuple(additions)))
        else:
            sentences.append(sentence)
    augmented = Corpus(name=target.name, sentences=tuple(sentences))
    return augmented, InjectionReport(
        injected=injected,
        discarded_overlap=discarded_overlap,
        discarded_unrequested=discarded_unrequested,
    )


def plan_to_json(plan: MergePlan) -> str:
    """Deterministically ordered JSON audit trail of a plan."""
    payload = {
        "lambda": plan.lam,
        "tau": plan.tau,
        "mappings": [
            {
                "source_label": m.source_label,
                "target_label": m.target_label,
                "s_merge": m.s_merge,
                "s_empirical": m.s_empirical,
                "s_semantic": m.s_semantic,
                "relation_hint": m.relation_hint,
            }
            for m in plan.mappings
        ],
        "unmapped_source_labels": list(plan.unmapped_source_labels),
    }
    return json.dumps(payload, ensure_ascii=False, indent=2)


def plan_from_json(text: str) -> MergePlan:
    try:
        payload = json.loads(text)
        mappings = tuple(
            Mapping(
                source_label=m["source_label"],
                target_label=m["target_label"],
                s_merge=float(m["s_merge"]),
                s_empirical=None if m["s_empirical"] is None else float(m["s_empirical"]),
                s_semantic=None if m["s_semantic"] is None else float(m["s_semantic"]),
                relation_hint=m["relation_hint"],
            )
            for m in payload["mappings"]
        )
        return MergePlan(
            lam=float(payload["lambda"]),
            tau=float(payload["tau"]),
            mappings=mappings,
            unmapped_source_labels=tuple(payload["unmapped_source_labels"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ParseError(f"invalid merge plan file: {exc}") from exc
