"""Contextual entity-embedding extraction.

Each sentence runs through the encoder once; an entity's vector is the
mean of the hidden states of all sub-tokens whose word index falls inside
the entity span.  Inference runs in eval mode without gradients, so
identical (sentence, span) inputs give bitwise-identical vectors within
one environment.
"""

from __future__ import annotations

import logging

import torch
from transformers import AutoModel, AutoTokenizer

from .config import AdapterConfig
from .formats import read_corpus, write_embeddings

log = logging.getLogger("nerfuse_adapter")


def extract_embeddings(corpus_path, out_path, config: AdapterConfig) -> int:
    """Write one embedding entry per gold entity; returns the entry count."""
    tokenizer = AutoTokenizer.from_pretrained(config.model)
    encoder = AutoModel.from_pretrained(config.model)
    encoder.eval()

    _, sentences = read_corpus(corpus_path)
    dim = encoder.config.hidden_size
    entries = []
    with torch.no_grad():
        for batch_start in range(0, len(sentences), config.batch_size):
            batch = sentences[batch_start : batch_start + config.batch_size]
            encoding = tokenizer(
                [s.tokens for s in batch],
                is_split_into_words=True,
                padding=True,
                truncation=True,
                max_length=config.max_length,
                return_tensors="pt",
            )
            hidden = encoder(
                input_ids=encoding["input_ids"],
                attention_mask=encoding["attention_mask"],
            ).last_hidden_state
            for b, sentence in enumerate(batch):
                word_ids = encoding.word_ids(b)
                if len(sentence.tokens) > max(
                    (w for w in word_ids if w is not None), default=-1
                ) + 1:
                    log.warning(
                        "sentence %s exceeds max length %d; truncated",
                        sentence.id, config.max_length,
                    )
                for start, end, label in sentence.spans:
                    positions = [
                        i for i, w in enumerate(word_ids) if w is not None and start <= w < end
                    ]
                    covered = {word_ids[i] for i in positions}
                    if covered != set(range(start, end)):
                        log.warning(
                            "entity beyond truncation skipped: sentence %s span (%d, %d, %s)",
                            sentence.id, start, end, label,
                        )
                        continue
                    vector = hidden[b, positions].mean(dim=0)
                    entries.append(
                        (label, sentence.id, "".join(sentence.tokens[start:end]), vector.tolist())
                    )
    write_embeddings(out_path, dim, config.model, entries)
    return len(entries)
