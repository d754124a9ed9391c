"""Span-level scoring and the grid-search evaluator hook.

The hook contract: invoked as ``... --train <corpus> --test <corpus>``,
train on the first, decode the second, print one JSON object
``{"micro_f1": float, "per_label": {...}}`` on stdout, exit 0.  Any
failure exits nonzero so the caller records the cell as failed.
"""

from __future__ import annotations

from .config import AdapterConfig
from .formats import Sentence, read_corpus
from .training import predict_records, train_model


def span_scores(gold_sentences: list[Sentence], records) -> dict:
    """Exact-match micro F1 plus per-label F1 over the gold schema."""
    gold = {(s.id, *span) for s in gold_sentences for span in s.spans}
    pred = {(sid, *span) for sid, spans in records.items() for span in spans}
    labels = sorted({g[3] for g in gold})

    def f1(gold_set, pred_set):
        tp = len(gold_set & pred_set)
        fp = len(pred_set - gold_set)
        fn = len(gold_set - pred_set)
        denominator = 2 * tp + fp + fn
        return 2 * tp / denominator if denominator else 0.0

    per_label = {
        label: f1({g for g in gold if g[3] == label}, {p for p in pred if p[3] == label})
        for label in labels
    }
    return {"micro_f1": f1(gold, pred), "per_label": per_label}


def evaluator_hook(train_path, test_path, config: AdapterConfig) -> dict:
    _, train_sentences = read_corpus(train_path)
    _, test_sentences = read_corpus(test_path)
    tokenizer, model, tags = train_model(train_sentences, config)
    records = predict_records(tokenizer, model, tags, test_sentences, config)
    return span_scores(test_sentences, records)
