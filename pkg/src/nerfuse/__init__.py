"""nerfuse: align NER label schemas across datasets and merge their corpora.

The package fuses two complementary label-similarity signals, an
empirical one derived from cross-dataset model predictions and a semantic
one derived from contextual entity embeddings, plans greedy pairwise
dataset merges, and sweeps the fusion weight and merge threshold under an
F1 constraint.  A synthetic harness with planted label relations verifies
the pipeline end to end.
"""

from .corpus import (
    Corpus,
    EntitySpan,
    LabelSchema,
    Sentence,
    concat,
    low_frequency_filter,
    parse_bio,
    parse_spans_jsonl,
    serialize_bio,
    serialize_spans_jsonl,
)
from .empirical import (
    PredictionSet,
    SimilarityMatrix,
    empirical_cell,
    empirical_matrix,
    matrix_sum,
)
from .errors import (
    EvaluatorError,
    NerfuseError,
    ParseError,
    SerializeError,
    ValidationError,
)
from .estimators import EmpiricalSimilarity, LabelMerger, MergeGridSearch, SemanticSimilarity
from .gridsearch import SearchConfig, TrialRecord, run_search, run_search_schedule, select_best
from .merge import (
    MergePlan,
    apply_plan,
    augment_labels,
    build_plan,
    classify_relation,
    merge_datasets,
    merged_cell,
    merged_matrix,
)
from .metrics import label_report, match_spans, micro_f1, prf1
from .pathplan import MergeSchedule, greedy_schedule, greedy_schedule_from_sums, pair_table
from .semantic import EmbeddingSet, center, centroid, normalize, semantic_cell, semantic_matrix
from .synth import SynthSpec, expected_empirical, gen_corpora, gen_embeddings, oracle_predict

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "EntitySpan",
    "LabelSchema",
    "Sentence",
    "concat",
    "low_frequency_filter",
    "parse_bio",
    "parse_spans_jsonl",
    "serialize_bio",
    "serialize_spans_jsonl",
    "PredictionSet",
    "SimilarityMatrix",
    "empirical_cell",
    "empirical_matrix",
    "matrix_sum",
    "EmbeddingSet",
    "center",
    "centroid",
    "normalize",
    "semantic_cell",
    "semantic_matrix",
    "MergePlan",
    "apply_plan",
    "augment_labels",
    "build_plan",
    "classify_relation",
    "merge_datasets",
    "merged_cell",
    "merged_matrix",
    "MergeSchedule",
    "greedy_schedule",
    "greedy_schedule_from_sums",
    "pair_table",
    "SearchConfig",
    "TrialRecord",
    "run_search",
    "run_search_schedule",
    "select_best",
    "SynthSpec",
    "expected_empirical",
    "gen_corpora",
    "gen_embeddings",
    "oracle_predict",
    "label_report",
    "match_spans",
    "micro_f1",
    "prf1",
    "EmpiricalSimilarity",
    "SemanticSimilarity",
    "LabelMerger",
    "MergeGridSearch",
    "NerfuseError",
    "ParseError",
    "ValidationError",
    "SerializeError",
    "EvaluatorError",
]
