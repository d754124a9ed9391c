"""Acceptance suite: one test per release criterion, at pinned tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line
per criterion with its runtime.
"""

import random
import time

import numpy as np

from nerfuse.corpus import (
    Corpus,
    EntitySpan,
    Sentence,
    parse_bio,
    parse_spans_jsonl,
    serialize_bio,
    serialize_spans_jsonl,
)
from nerfuse.empirical import PredictionSet, empirical_cell, empirical_matrix
from nerfuse.gridsearch import TrialRecord, select_best
from nerfuse.merge import augment_labels, build_plan, merged_cell
from nerfuse.pathplan import greedy_schedule, greedy_schedule_from_sums
from nerfuse.semantic import EmbeddingSet, EmbeddingEntry, semantic_matrix
from nerfuse.synth import (
    expected_empirical,
    gen_corpora,
    gen_embeddings,
    oracle_predict,
)

from conftest import random_corpus
from reference import HashSums, greedy_steps_reference, semantic_pipeline_reference
from test_pathplan import name_keyed_provider, corpora
from test_synth import planted_spec


def report(criterion, label, started):
    elapsed = time.perf_counter() - started
    print(f"[acceptance {criterion}] {label}: PASS ({elapsed:.2f}s)")
    return elapsed


def test_criterion_1_empirical_cell_paper_example():
    started = time.perf_counter()
    sentences = []
    records = {}
    for i in range(100):
        if i < 70:
            gold_spans = (EntitySpan(0, 2, "GPE"),)
        else:
            gold_spans = (EntitySpan(2, 3, "LOC"),)
        sentences.append(Sentence(id=f"t:{i}", tokens=("w0", "w1", "w2"), spans=gold_spans))
        records[f"t:{i}"] = (EntitySpan(0, 2, "address"),)
    gold = Corpus(name="t", sentences=tuple(sentences))
    pred = PredictionSet(source_model_tag="clue", schema=("address",), records=records)

    assert empirical_cell(pred, gold, "address", "GPE") == 0.7
    elapsed = report(1, "100 predicted spans, 70 coincident -> cell 0.7 exactly", started)
    assert elapsed < 1.0


def test_criterion_2_synthetic_convergence():
    started = time.perf_counter()
    spec = planted_spec(seed=2024, spans_per_label=2000, sigma=0.15, diag=0.9)
    synth_corpora, _ = gen_corpora(spec)
    pred = oracle_predict(synth_corpora["TGT"], spec, "SRC")
    matrix = empirical_matrix(
        pred, synth_corpora["TGT"], set(pred.schema), synth_corpora["TGT"].schema.labels()
    )
    checked = 0
    for ls in matrix.source_labels:
        for lt in matrix.target_labels:
            estimate = matrix.cell(ls, lt)
            expectation = expected_empirical(spec, "SRC", "TGT", ls, lt)
            if estimate is None or expectation is None:
                continue
            assert abs(estimate - expectation) <= 0.03, (ls, lt, estimate, expectation)
            checked += 1
    assert checked == 30
    elapsed = report(2, "all 30 cells within +-0.03 of the closed form at n=2000", started)
    assert elapsed < 10.0


def test_criterion_3_semantic_matches_bruteforce_reference():
    started = time.perf_counter()
    rng = np.random.default_rng(31337)
    cases = 0
    for dim in (2, 4, 8, 768):
        for _ in range(25):
            source = {
                f"s{i}": [list(rng.normal(size=dim)) for _ in range(int(rng.integers(1, 5)))]
                for i in range(int(rng.integers(1, 4)))
            }
            target = {
                f"t{i}": [list(rng.normal(size=dim)) for _ in range(int(rng.integers(1, 5)))]
                for i in range(int(rng.integers(1, 4)))
            }
            got = semantic_matrix(
                EmbeddingSet(dim, {l: [EmbeddingEntry(vector=np.array(v)) for v in vs]
                                   for l, vs in source.items()}),
                EmbeddingSet(dim, {l: [EmbeddingEntry(vector=np.array(v)) for v in vs]
                                   for l, vs in target.items()}),
            )
            want = semantic_pipeline_reference(source, target)
            for (ls, lt), value in want.items():
                assert abs(got.cell(ls, lt) - value) <= 1e-9
            cases += 1
    assert cases == 100
    elapsed = report(3, "100 random instances agree with the reference to 1e-9", started)
    assert elapsed < 5.0


def test_criterion_4_fusion_endpoints_and_threshold_monotonicity():
    started = time.perf_counter()
    rng = random.Random(44)
    for _ in range(200):
        s_sem = rng.uniform(-1, 1)
        s_emp = rng.uniform(0, 1)
        assert merged_cell(s_sem, s_emp, 0.0) == s_sem
        assert merged_cell(s_sem, s_emp, 1.0) == s_emp

    from test_merge import random_matrix_pair

    for _ in range(50):
        sem, emp = random_matrix_pair(rng, n_source=5, n_target=4, undefined_rate=0.15)
        at_half = set(build_plan(sem, emp, 0.5, 0.5).as_dict().items())
        at_third = set(build_plan(sem, emp, 0.5, 0.3).as_dict().items())
        assert at_half <= at_third
    report(4, "exact endpoints; mappings(tau=0.5) within mappings(tau=0.3) on 50 pairs", started)


def test_criterion_5_plan_recovery_over_ten_seeds():
    started = time.perf_counter()
    for seed in range(10):
        spec = planted_spec(seed=seed, spans_per_label=500, sigma=0.15, diag=0.9)
        synth_corpora, truth = gen_corpora(spec)
        pred = oracle_predict(synth_corpora["TGT"], spec, "SRC")
        emp = empirical_matrix(
            pred, synth_corpora["TGT"], set(pred.schema), synth_corpora["TGT"].schema.labels()
        )
        sem = semantic_matrix(gen_embeddings(spec, "SRC"), gen_embeddings(spec, "TGT"))
        plan = build_plan(sem, emp, lam=0.5, tau=0.3)
        mapped = plan.as_dict()
        planted = {
            (ls, lt)
            for (ls, lt), rel in truth.relations[("SRC", "TGT")].items()
            if rel in ("equivalence", "subset")
        }
        recovered = {(ls, lt) for ls, lt in mapped.items() if (ls, lt) in planted}
        assert recovered == planted, (seed, planted - recovered)
        for ls, lt in mapped.items():
            assert truth.relation("SRC", "TGT", ls, lt) != "disjoint", (seed, ls, lt)
    elapsed = report(5, "100% planted equivalence/subset recovered, 0 disjoint merges, 10 seeds", started)
    assert elapsed < 60.0


def test_criterion_6_table4_selection_logic():
    started = time.perf_counter()
    mk = lambda lam, tau, labels, f1: TrialRecord(
        lam=lam, tau=tau, merged_label_count=labels, micro_f1=f1,
        row_increment_abs=0, status="ok",
    )
    records = [
        mk(0.3, 0.4, 15, 0.79),
        mk(0.4, 0.4, 15, 0.79),
        mk(0.5, 0.3, 15, 0.79),
        mk(0.6, 0.3, 15, 0.79),
        mk(0.7, 0.1, 20, 0.75),
    ]
    selection = select_best(records, baseline_f1=0.80, tolerance=0.02)
    assert len(selection.winners) == 4
    assert {(r.lam, r.tau) for r in selection.winners} == {
        (0.3, 0.4), (0.4, 0.4), (0.5, 0.3), (0.6, 0.3)
    }
    assert all(r.merged_label_count == 15 for r in selection.winners)
    assert (selection.canonical.lam, selection.canonical.tau) == (0.5, 0.3)
    report(6, "four 15-label winners, 20-label cell infeasible, canonical (0.5, 0.3)", started)


def test_criterion_7_greedy_schedule_paper_shape_and_reference():
    started = time.perf_counter()
    sums = {
        ("CLUENER", "BosonNER"): 3.2, ("BosonNER", "CLUENER"): 2.1,
        ("CLUENER", "OntoNotes"): 1.4, ("OntoNotes", "CLUENER"): 1.0,
        ("BosonNER", "OntoNotes"): 1.1, ("OntoNotes", "BosonNER"): 0.8,
        ("BosonNERM", "OntoNotes"): 2.0, ("OntoNotes", "BosonNERM"): 1.2,
    }
    schedule = greedy_schedule(
        corpora("CLUENER", "BosonNER", "OntoNotes"), name_keyed_provider(sums)
    )
    steps = [(s.source, s.target) for s in schedule.steps]
    assert steps[0] == ("CLUENER", "BosonNER")
    assert "OntoNotes" in steps[1]

    for seed in range(50):
        lazy = HashSums(seed)
        got = greedy_schedule_from_sums(["D1", "D2", "D3"], lazy)
        want = greedy_steps_reference(["D1", "D2", "D3"], lazy)
        assert [(s.source, s.target) for s in got.steps] == want
    report(7, "paper-shaped first step + 50 random fixtures match the reference", started)


def test_criterion_8_format_round_trips():
    started = time.perf_counter()
    rng = random.Random(88)
    for k in range(100):
        corpus = random_corpus(rng, f"c{k}", n_sentences=rng.randint(1, 8))
        bio = serialize_bio(corpus)
        from_bio = parse_bio(bio, corpus.name)
        assert [s.tokens for s in from_bio.sentences] == [s.tokens for s in corpus.sentences]
        assert [s.spans for s in from_bio.sentences] == [s.spans for s in corpus.sentences]
        assert serialize_bio(from_bio) == bio

        jsonl = serialize_spans_jsonl(corpus)
        from_jsonl = parse_spans_jsonl(jsonl, corpus.name)
        assert [s.id for s in from_jsonl.sentences] == [s.id for s in corpus.sentences]
        assert [s.tokens for s in from_jsonl.sentences] == [s.tokens for s in corpus.sentences]
        assert [s.spans for s in from_jsonl.sentences] == [s.spans for s in corpus.sentences]
        assert serialize_spans_jsonl(from_jsonl) == jsonl
    report(8, "BIO and span-JSONL round-trips on 100 random corpora, byte-stable", started)


def test_criterion_9_augmentation_safety():
    started = time.perf_counter()
    rng = random.Random(99)
    for k in range(50):
        target = random_corpus(rng, f"t{k}", n_sentences=6, labels=("PER", "ORG"))
        records = {}
        for s in target.sentences:
            spans = []
            cursor = 0
            while cursor < len(s.tokens):
                if rng.random() < 0.5:
                    end = min(len(s.tokens), cursor + rng.randint(1, 2))
                    spans.append(EntitySpan(cursor, end, rng.choice(["NEW1", "NEW2"])))
                    cursor = end
                cursor += 1
            records[s.id] = tuple(spans)
        pseudo = PredictionSet(source_model_tag="aug", schema=("NEW1", "NEW2"), records=records)
        inject = {"NEW1", "NEW2"} - target.schema.labels()
        augmented, _ = augment_labels(target, pseudo, inject)
        for before, after in zip(target.sentences, augmented.sentences):
            assert set(before.spans) <= set(after.spans)  # gold never altered
            for added in set(after.spans) - set(before.spans):
                assert added.label in inject  # never an existing label
            ordered = sorted(after.spans)
            for x, y in zip(ordered, ordered[1:]):
                assert not x.overlaps(y)  # output stays non-overlapping
    report(9, "gold untouched, labels fresh, no overlaps on 50 random fixtures", started)
