"""BERT encoder with a CRF tagging head, plus word-level batch encoding.

Corpora are pre-tokenized, so sentences are fed with
``is_split_into_words=True`` and the tagger operates on one position per
word: the hidden state of each word's first sub-token.  Words lost to
truncation simply have no position; spans that reach past the truncation
point are skipped by the callers (with a logged sentence id).
"""

from __future__ import annotations

import torch
from torch import nn
from transformers import AutoModel, AutoTokenizer

from .crf import LinearChainCRF


def load_backbone(model_id: str):
    tokenizer = AutoTokenizer.from_pretrained(model_id)
    encoder = AutoModel.from_pretrained(model_id)
    return tokenizer, encoder


def encode_words(tokenizer, batch_tokens: list[list[str]], max_length: int):
    """Tokenize pre-split sentences and locate each word's first sub-token.

    Returns (encoding, first_subtoken_index, word_mask, n_words_kept);
    index/mask have shape (batch, max_words_in_batch).
    """
    encoding = tokenizer(
        batch_tokens,
        is_split_into_words=True,
        padding=True,
        truncation=True,
        max_length=max_length,
        return_tensors="pt",
    )
    batch = len(batch_tokens)
    kept = []
    positions = []
    for b in range(batch):
        word_ids = encoding.word_ids(b)
        first: dict[int, int] = {}
        for position, word in enumerate(word_ids):
            if word is not None and word not in first:
                first[word] = position
        n = len(first)
        # words survive truncation only as a prefix
        assert sorted(first) == list(range(n))
        kept.append(n)
        positions.append([first[w] for w in range(n)])
    max_words = max(kept) if kept else 0
    index = torch.zeros((batch, max_words), dtype=torch.long)
    mask = torch.zeros((batch, max_words), dtype=torch.bool)
    for b, pos in enumerate(positions):
        index[b, : len(pos)] = torch.tensor(pos, dtype=torch.long)
        mask[b, : len(pos)] = True
    return encoding, index, mask, kept


class BertCrfTagger(nn.Module):
    def __init__(self, encoder, num_tags: int, dropout: float = 0.1):
        super().__init__()
        self.encoder = encoder
        self.dropout = nn.Dropout(dropout)
        self.classifier = nn.Linear(encoder.config.hidden_size, num_tags)
        self.crf = LinearChainCRF(num_tags)

    def head_parameters(self):
        yield from self.classifier.parameters()
        yield from self.crf.parameters()

    def emissions(self, encoding, index, word_mask):
        hidden = self.encoder(
            input_ids=encoding["input_ids"],
            attention_mask=encoding["attention_mask"],
        ).last_hidden_state
        gathered = hidden.gather(1, index.unsqueeze(-1).expand(-1, -1, hidden.size(-1)))
        return self.classifier(self.dropout(gathered))

    def loss(self, encoding, index, word_mask, tags):
        return self.crf.neg_log_likelihood(self.emissions(encoding, index, word_mask), tags, word_mask)

    @torch.no_grad()
    def predict(self, encoding, index, word_mask) -> list[list[int]]:
        return self.crf.decode(self.emissions(encoding, index, word_mask), word_mask)
