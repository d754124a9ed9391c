"""Fine-tune the tagger on one corpus and decode spans on another."""

from __future__ import annotations

import logging

import torch

from .config import AdapterConfig
from .formats import Sentence, read_corpus, tags_from_spans, write_predictions
from .model import BertCrfTagger, encode_words, load_backbone

log = logging.getLogger("nerfuse_adapter")


def tag_vocabulary(sentences: list[Sentence]) -> list[str]:
    labels = sorted({label for s in sentences for _, _, label in s.spans})
    tags = ["O"]
    for label in labels:
        tags.extend([f"B-{label}", f"I-{label}"])
    return tags


def _spans_from_tag_ids(tag_ids: list[int], tags: list[str]) -> list[tuple[int, int, str]]:
    spans = []
    label, start = None, -1
    for i, tid in enumerate(tag_ids):
        tag = tags[tid]
        keep = tag.startswith("I-") and tag[2:] == label
        if not keep and label is not None:
            spans.append((start, i, label))
            label = None
        if tag.startswith("B-") or (tag.startswith("I-") and not keep):
            label, start = tag[2:], i
    if label is not None:
        spans.append((start, len(tag_ids), label))
    return spans


def train_model(train_sentences: list[Sentence], config: AdapterConfig):
    """Returns (tokenizer, fitted tagger, tag list)."""
    torch.manual_seed(config.seed)
    tokenizer, encoder = load_backbone(config.model)
    tags = tag_vocabulary(train_sentences)
    tag_to_id = {t: i for i, t in enumerate(tags)}
    model = BertCrfTagger(encoder, num_tags=len(tags))
    optimizer = torch.optim.AdamW(
        [
            {"params": model.encoder.parameters(), "lr": config.lr_encoder},
            {"params": list(model.head_parameters()), "lr": config.lr_head},
        ]
    )

    order = torch.Generator().manual_seed(config.seed)
    model.train()
    for epoch in range(config.epochs):
        permutation = torch.randperm(len(train_sentences), generator=order).tolist()
        total = 0.0
        for start in range(0, len(permutation), config.batch_size):
            chunk = [train_sentences[i] for i in permutation[start : start + config.batch_size]]
            encoding, index, word_mask, kept = encode_words(
                tokenizer, [s.tokens for s in chunk], config.max_length
            )
            gold = torch.zeros_like(index)
            for b, sentence in enumerate(chunk):
                sentence_tags = tags_from_spans(len(sentence.tokens), sentence.spans)
                ids = [tag_to_id[t] for t in sentence_tags[: kept[b]]]
                gold[b, : len(ids)] = torch.tensor(ids, dtype=torch.long)
            optimizer.zero_grad()
            loss = model.loss(encoding, index, word_mask, gold)
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), 5.0)
            optimizer.step()
            total += float(loss.detach())
        if not torch.isfinite(torch.tensor(total)):
            raise RuntimeError(f"training diverged at epoch {epoch}: loss {total}")
        log.debug("epoch %d loss %.4f", epoch, total)
    model.eval()
    return tokenizer, model, tags


def predict_records(
    tokenizer, model, tags: list[str], sentences: list[Sentence], config: AdapterConfig,
    restrict_labels=None,
) -> dict[str, list[tuple[int, int, str]]]:
    records: dict[str, list[tuple[int, int, str]]] = {}
    for start in range(0, len(sentences), config.batch_size):
        chunk = sentences[start : start + config.batch_size]
        encoding, index, word_mask, kept = encode_words(
            tokenizer, [s.tokens for s in chunk], config.max_length
        )
        paths = model.predict(encoding, index, word_mask)
        for sentence, path, n in zip(chunk, paths, kept):
            if n < len(sentence.tokens):
                log.warning(
                    "sentence %s truncated at %d of %d words", sentence.id, n, len(sentence.tokens)
                )
            spans = _spans_from_tag_ids(path, tags)
            if restrict_labels is not None:
                spans = [s for s in spans if s[2] in restrict_labels]
            records[sentence.id] = spans
    return records


def train_predict(
    train_path, predict_path, out_path, config: AdapterConfig, restrict_labels=None
) -> dict[str, list[tuple[int, int, str]]]:
    """Fine-tune on one corpus, decode the other, write a prediction file."""
    train_name, train_sentences = read_corpus(train_path)
    _, predict_sentences = read_corpus(predict_path)
    tokenizer, model, tags = train_model(train_sentences, config)
    records = predict_records(
        tokenizer, model, tags, predict_sentences, config, restrict_labels=restrict_labels
    )
    schema = {label for s in train_sentences for _, _, label in s.spans}
    if restrict_labels is not None:
        schema &= set(restrict_labels)
    write_predictions(out_path, train_name, schema, records)
    return records
