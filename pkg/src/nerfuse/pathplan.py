"""Greedy selection of the pairwise dataset merge order.

Datasets are merged two at a time.  The first step takes the ordered pair
with the highest sum of defined empirical-similarity cells; every later
step scores each remaining dataset against the current intermediate in
both directions and takes the maximum.  An ordered pair (S, T) means
"train on S, predict on T, map S's labels into T's schema".

Empirical matrices come from a provider callable so the caller decides
how they are produced (real model retraining, a synthetic oracle, or a
fixture keyed on corpus names).  Sums involving an intermediate are
recomputed through the provider; how the intermediate corpus is formed is
also pluggable (plain concatenation by default).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .corpus import Corpus, concat
from .empirical import matrix_sum
from .errors import NerfuseError, ValidationError

__all__ = [
    "PairScoreTable",
    "MergeStep",
    "MergeSchedule",
    "pair_table",
    "greedy_schedule",
    "greedy_schedule_from_sums",
]


@dataclass(frozen=True)
class PairScoreTable:
    """Ordered (source name, target name) -> empirical matrix sum."""

    entries: dict[tuple[str, str], float]

    def best_pair(self) -> tuple[str, str]:
        # maximal sum; ties resolved by lexicographic (source, target)
        return min(self.entries, key=lambda pair: (-self.entries[pair], pair))


@dataclass(frozen=True)
class MergeStep:
    source: str
    target: str
    intermediate: str


@dataclass(frozen=True)
class MergeSchedule:
    steps: tuple[MergeStep, ...]
    pair_table: PairScoreTable

    def to_json(self) -> str:
        payload = {
            "steps": [
                {"source": s.source, "target": s.target, "intermediate": s.intermediate}
                for s in self.steps
            ],
            "pair_table": {
                f"{source}->{target}": value
                for (source, target), value in sorted(self.pair_table.entries.items())
            },
        }
        return json.dumps(payload, ensure_ascii=False, indent=2)


def _provider_sum(emp_provider, source: Corpus, target: Corpus) -> float:
    try:
        return matrix_sum(emp_provider(source, target))
    except NerfuseError:
        raise
    except Exception as exc:
        raise NerfuseError(
            f"empirical provider failed for pair ({source.name!r}, {target.name!r}): {exc}"
        ) from exc


def pair_table(datasets, emp_provider) -> PairScoreTable:
    """All n*(n-1) ordered-pair empirical sums (undefined cells excluded)."""
    names = [d.name for d in datasets]
    if len(set(names)) != len(names):
        raise ValidationError(f"dataset names must be unique, got {names}")
    entries = {}
    for source in datasets:
        for target in datasets:
            if source.name == target.name:
                continue
            entries[(source.name, target.name)] = _provider_sum(emp_provider, source, target)
    return PairScoreTable(entries=entries)


def _default_merger(source: Corpus, target: Corpus, name: str) -> Corpus:
    return concat(source, target, name)[0]


def _intermediate_name(target_name: str, taken: set[str]) -> str:
    name = f"{target_name}M"
    while name in taken:
        name += "M"
    return name


def greedy_schedule(datasets, emp_provider, merger=None) -> MergeSchedule:
    """Plan the merge order by the unidirectional-similarity greedy rule.

    ``emp_provider(source: Corpus, target: Corpus) -> SimilarityMatrix``
    must be total over ordered pairs, including pairs involving
    intermediates.  ``merger(source, target, name) -> Corpus`` builds each
    intermediate (default: plain concatenation).
    """
    datasets = list(datasets)
    if len(datasets) < 2:
        raise ValidationError(f"need at least 2 datasets, got {len(datasets)}")
    merger = merger or _default_merger

    table = pair_table(datasets, emp_provider)
    by_name = {d.name: d for d in datasets}
    taken = set(by_name)

    source_name, target_name = table.best_pair()
    intermediate_name = _intermediate_name(target_name, taken)
    taken.add(intermediate_name)
    steps = [MergeStep(source=source_name, target=target_name, intermediate=intermediate_name)]
    current = merger(by_name[source_name], by_name[target_name], intermediate_name)
    remaining = [d for d in datasets if d.name not in (source_name, target_name)]

    while remaining:
        candidates = {}
        for other in remaining:
            candidates[(other.name, current.name)] = _provider_sum(emp_provider, other, current)
            candidates[(current.name, other.name)] = _provider_sum(emp_provider, current, other)
        source_name, target_name = min(
            candidates, key=lambda pair: (-candidates[pair], pair)
        )
        intermediate_name = _intermediate_name(target_name, taken)
        taken.add(intermediate_name)
        steps.append(
            MergeStep(source=source_name, target=target_name, intermediate=intermediate_name)
        )
        lookup = {current.name: current, **{d.name: d for d in remaining}}
        current = merger(lookup[source_name], lookup[target_name], intermediate_name)
        remaining = [d for d in remaining if d.name not in (source_name, target_name)]
    return MergeSchedule(steps=tuple(steps), pair_table=table)


def greedy_schedule_from_sums(names, sums: dict[tuple[str, str], float]) -> MergeSchedule:
    """Greedy schedule over precomputed pair sums keyed by dataset name.

    ``sums`` must cover every ordered pair the walk visits, including
    pairs against intermediates (named ``<target>M`` as in
    ``greedy_schedule``); a missing entry is an error naming the pair.
    """
    names = list(names)
    if len(set(names)) != len(names):
        raise ValidationError(f"dataset names must be unique, got {names}")
    if len(names) < 2:
        raise ValidationError(f"need at least 2 datasets, got {len(names)}")

    def lookup(source, target):
        try:
            return sums[(source, target)]
        except KeyError:
            raise NerfuseError(
                f"no pair sum for ({source!r}, {target!r}); provide it in the sums table"
            ) from None

    table = PairScoreTable(
        entries={(s, t): lookup(s, t) for s in names for t in names if s != t}
    )
    taken = set(names)
    source_name, target_name = table.best_pair()
    intermediate = _intermediate_name(target_name, taken)
    taken.add(intermediate)
    steps = [MergeStep(source=source_name, target=target_name, intermediate=intermediate)]
    remaining = [n for n in names if n not in (source_name, target_name)]
    current = intermediate
    while remaining:
        candidates = {}
        for other in remaining:
            candidates[(other, current)] = lookup(other, current)
            candidates[(current, other)] = lookup(current, other)
        source_name, target_name = min(candidates, key=lambda p: (-candidates[p], p))
        intermediate = _intermediate_name(target_name, taken)
        taken.add(intermediate)
        steps.append(MergeStep(source=source_name, target=target_name, intermediate=intermediate))
        remaining = [n for n in remaining if n not in (source_name, target_name)]
        current = intermediate
    return MergeSchedule(steps=tuple(steps), pair_table=table)
