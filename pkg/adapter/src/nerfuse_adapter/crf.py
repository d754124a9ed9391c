"""Linear-chain CRF layer for sequence tagging."""

from __future__ import annotations

import torch
from torch import nn


class LinearChainCRF(nn.Module):
    """Start/end/transition scores with forward-algorithm loss and Viterbi decode.

    Shapes: emissions (batch, steps, tags), tags (batch, steps),
    mask (batch, steps) bool with mask[:, 0] all True.
    """

    def __init__(self, num_tags: int):
        super().__init__()
        self.num_tags = num_tags
        self.start = nn.Parameter(torch.empty(num_tags).uniform_(-0.1, 0.1))
        self.end = nn.Parameter(torch.empty(num_tags).uniform_(-0.1, 0.1))
        self.transitions = nn.Parameter(torch.empty(num_tags, num_tags).uniform_(-0.1, 0.1))

    def _path_score(self, emissions, tags, mask):
        batch, steps, _ = emissions.shape
        idx = torch.arange(batch)
        score = self.start[tags[:, 0]] + emissions[idx, 0, tags[:, 0]]
        for i in range(1, steps):
            step = self.transitions[tags[:, i - 1], tags[:, i]] + emissions[idx, i, tags[:, i]]
            score = score + step * mask[:, i]
        last = mask.long().sum(dim=1) - 1
        score = score + self.end[tags[idx, last]]
        return score

    def _log_partition(self, emissions, mask):
        batch, steps, _ = emissions.shape
        alpha = self.start.unsqueeze(0) + emissions[:, 0]
        for i in range(1, steps):
            widened = alpha.unsqueeze(2) + self.transitions.unsqueeze(0) + emissions[:, i].unsqueeze(1)
            advanced = torch.logsumexp(widened, dim=1)
            keep = mask[:, i].unsqueeze(1)
            alpha = torch.where(keep, advanced, alpha)
        alpha = alpha + self.end.unsqueeze(0)
        return torch.logsumexp(alpha, dim=1)

    def neg_log_likelihood(self, emissions, tags, mask) -> torch.Tensor:
        nll = self._log_partition(emissions, mask) - self._path_score(emissions, tags, mask)
        return nll.mean()

    @torch.no_grad()
    def decode(self, emissions, mask) -> list[list[int]]:
        batch, steps, num_tags = emissions.shape
        score = self.start.unsqueeze(0) + emissions[:, 0]
        history = []
        for i in range(1, steps):
            widened = score.unsqueeze(2) + self.transitions.unsqueeze(0) + emissions[:, i].unsqueeze(1)
            best, pointer = widened.max(dim=1)
            keep = mask[:, i].unsqueeze(1)
            score = torch.where(keep, best, score)
            history.append(pointer)
        score = score + self.end.unsqueeze(0)

        lengths = mask.long().sum(dim=1)
        paths = []
        for b in range(batch):
            n = int(lengths[b])
            tag = int(score[b].argmax())
            path = [tag]
            # history[i-1] holds the best predecessor for step i
            for i in range(n - 1, 0, -1):
                tag = int(history[i - 1][b, tag])
                path.append(tag)
            paths.append(path[::-1])
        return paths
