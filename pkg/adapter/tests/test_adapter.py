import json
import logging
import subprocess
import sys
from dataclasses import replace
from pathlib import Path

import pytest

from nerfuse_adapter.embeddings import extract_embeddings
from nerfuse_adapter.evaluate import span_scores
from nerfuse_adapter.formats import read_corpus
from nerfuse_adapter.training import train_predict

# the primary toolkit is the authority on whether our files are valid
from nerfuse.corpus import parse_bio
from nerfuse.empirical import parse_predictions_jsonl
from nerfuse.metrics import label_report, micro_f1, match_spans
from nerfuse.semantic import parse_embeddings_jsonl, semantic_matrix

from conftest import to_bio


def hook_argv(config, train, test, epochs=None):
    return [
        sys.executable, "-m", "nerfuse_adapter.cli", "eval-hook",
        "--train", str(train), "--test", str(test),
        "--model", config.model,
        "--max-length", str(config.max_length),
        "--lr-encoder", str(config.lr_encoder),
        "--lr-head", str(config.lr_head),
        "--epochs", str(epochs or config.epochs),
        "--batch-size", str(config.batch_size),
        "--seed", str(config.seed),
    ]


@pytest.fixture(scope="session")
def sample_embeddings(tmp_path_factory, toy_corpora, fast_config):
    out = tmp_path_factory.mktemp("emb") / "sample20.embeddings.jsonl"
    count = extract_embeddings(toy_corpora["sample20"], out, fast_config)
    return out, count


@pytest.fixture(scope="session")
def self_predictions(tmp_path_factory, toy_corpora, fast_config):
    out = tmp_path_factory.mktemp("pred") / "train_on_train.jsonl"
    train_predict(toy_corpora["train"], toy_corpora["train"], out, fast_config)
    return out


class TestEmbeddingConformance:
    def test_file_validates_against_toolkit_schema(self, sample_embeddings, toy_corpora):
        out, count = sample_embeddings
        embeddings, model_tag = parse_embeddings_jsonl(out.read_text(encoding="utf-8"))
        assert embeddings.dim == 32
        gold = parse_bio(Path(toy_corpora["sample20"]).read_text(encoding="utf-8"), "sample20")
        assert count == gold.span_count()
        assert sum(len(v) for v in embeddings.entries.values()) == count
        assert set(embeddings.labels()) <= gold.schema.labels()

    def test_entries_carry_text_and_sentence_id(self, sample_embeddings):
        out, _ = sample_embeddings
        lines = out.read_text(encoding="utf-8").strip().split("\n")[1:]
        for line in lines:
            record = json.loads(line)
            assert record["id"].startswith("sample20:")
            assert record["text"]

    def test_bitwise_stable_across_runs(self, tmp_path, toy_corpora, fast_config):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        extract_embeddings(toy_corpora["sample20"], a, fast_config)
        extract_embeddings(toy_corpora["sample20"], b, fast_config)
        assert a.read_bytes() == b.read_bytes()

    def test_self_similarity_through_toolkit_pipeline(self, tmp_path, toy_corpora, fast_config):
        # embedding the same entity sets twice must give self-similarity 1.0
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        extract_embeddings(toy_corpora["train"], a, fast_config)
        extract_embeddings(toy_corpora["train"], b, fast_config)
        set_a, _ = parse_embeddings_jsonl(a.read_text(encoding="utf-8"))
        set_b, _ = parse_embeddings_jsonl(b.read_text(encoding="utf-8"))
        matrix = semantic_matrix(set_a, set_b)
        for label in matrix.source_labels:
            assert matrix.cell(label, label) == pytest.approx(1.0, abs=1e-6)

    def test_empty_corpus_rejected(self, tmp_path, fast_config):
        empty = tmp_path / "empty.bio"
        empty.write_text("\n", encoding="utf-8")
        with pytest.raises(ValueError):
            extract_embeddings(empty, tmp_path / "out.jsonl", fast_config)

    def test_entity_beyond_truncation_skipped_with_log(self, tmp_path, fast_config, caplog):
        tokens = ["的"] * 8 + ["呼", "甲", "乙", "君"]
        bio = to_bio([(tokens, [(9, 11, "PER")])])
        corpus = tmp_path / "long.bio"
        corpus.write_text(bio, encoding="utf-8")
        short = replace(fast_config, max_length=6)
        with caplog.at_level(logging.WARNING, logger="nerfuse_adapter"):
            count = extract_embeddings(corpus, tmp_path / "out.jsonl", short)
        assert count == 0
        assert any("beyond truncation" in r.message for r in caplog.records)
        assert any("long:0" in str(r.args) for r in caplog.records)

    def test_multi_subtoken_word_pooling(self, tmp_path, fast_config):
        # "點心" splits into two sub-tokens of one word; pooling must cover both
        bio = to_bio([(["去", "點心", "了"], [(1, 2, "LOC")])])
        corpus = tmp_path / "multi.bio"
        corpus.write_text(bio, encoding="utf-8")
        out = tmp_path / "out.jsonl"
        assert extract_embeddings(corpus, out, fast_config) == 1
        embeddings, _ = parse_embeddings_jsonl(out.read_text(encoding="utf-8"))
        assert embeddings.entries["LOC"][0].text == "點心"


class TestTrainPredict:
    def test_prediction_file_validates_and_loads(self, self_predictions, toy_corpora):
        pred = parse_predictions_jsonl(self_predictions.read_text(encoding="utf-8"))
        assert pred.source_model_tag == "train"
        assert set(pred.schema) == {"PER", "LOC", "NUM"}
        gold = parse_bio(Path(toy_corpora["train"]).read_text(encoding="utf-8"), "train")
        assert set(pred.records) <= gold.sentence_ids()
        # loads through the toolkit's matcher without error
        match_spans(gold, pred)

    def test_memorizes_tiny_corpus(self, self_predictions, toy_corpora):
        pred = parse_predictions_jsonl(self_predictions.read_text(encoding="utf-8"))
        gold = parse_bio(Path(toy_corpora["train"]).read_text(encoding="utf-8"), "train")
        score = micro_f1(match_spans(gold, pred))
        assert score >= 0.9, f"self-prediction micro F1 {score}"

    def test_pseudo_label_mode_restricts_labels(self, tmp_path, toy_corpora, fast_config):
        out = tmp_path / "pseudo.jsonl"
        records = train_predict(
            toy_corpora["train"], toy_corpora["test"], out, fast_config,
            restrict_labels={"PER"},
        )
        assert all(label == "PER" for spans in records.values() for _, _, label in spans)
        pred = parse_predictions_jsonl(out.read_text(encoding="utf-8"))
        assert pred.schema == ("PER",)


class TestEvaluatorHook:
    def test_emits_parseable_json(self, toy_corpora, fast_config):
        proc = subprocess.run(
            hook_argv(fast_config, toy_corpora["train"], toy_corpora["test"], epochs=25),
            capture_output=True, text=True,
        )
        assert proc.returncode == 0, proc.stderr
        payload = json.loads(proc.stdout)
        assert 0.0 <= payload["micro_f1"] <= 1.0
        gold = parse_bio(Path(toy_corpora["test"]).read_text(encoding="utf-8"), "test")
        assert set(payload["per_label"]) <= gold.schema.labels()

    def test_missing_file_argument_exits_1(self, toy_corpora, fast_config):
        argv = hook_argv(fast_config, toy_corpora["train"], toy_corpora["test"])
        argv = argv[: argv.index("--test")] + argv[argv.index("--test") + 2 :]
        proc = subprocess.run(argv, capture_output=True, text=True)
        assert proc.returncode == 1

    def test_nonexistent_file_exits_nonzero(self, toy_corpora, fast_config, tmp_path):
        proc = subprocess.run(
            hook_argv(fast_config, tmp_path / "ghost.bio", toy_corpora["test"]),
            capture_output=True, text=True,
        )
        assert proc.returncode != 0

    def test_console_entry_matches_module_entry(self, toy_corpora, fast_config):
        from nerfuse_adapter.cli import eval_hook_main

        argv = hook_argv(fast_config, toy_corpora["train"], toy_corpora["test"], epochs=5)[4:]
        assert eval_hook_main(argv) == 0


class TestGridIntegration:
    def test_hook_drives_toolkit_grid_search(self, tmp_path, toy_corpora, fast_config):
        # one-cell sweep through the primary toolkit, evaluated by this adapter
        from nerfuse.corpus import parse_bio as load
        from nerfuse.empirical import SimilarityMatrix
        from nerfuse.gridsearch import SearchConfig, run_search

        source = load(Path(toy_corpora["test"]).read_text(encoding="utf-8"), "src")
        target = load(Path(toy_corpora["train"]).read_text(encoding="utf-8"), "tgt")
        labels = tuple(sorted(target.schema.labels()))
        cells = {s: {t: 1.0 if s == t else 0.0 for t in labels} for s in labels}
        sem = SimilarityMatrix("semantic", labels, labels, cells)
        emp = SimilarityMatrix("empirical", labels, labels, cells)
        evaluator = (
            sys.executable, "-m", "nerfuse_adapter.cli", "eval-hook",
            "--model", fast_config.model,
            "--max-length", str(fast_config.max_length),
            "--lr-encoder", str(fast_config.lr_encoder),
            "--lr-head", str(fast_config.lr_head),
            "--epochs", "12",
            "--batch-size", str(fast_config.batch_size),
            "--seed", str(fast_config.seed),
        )
        config = SearchConfig(
            baseline_f1=0.1,
            evaluator=evaluator,
            lambda_grid=(0.5,),
            tau_grid=(0.3,),
        )
        records = run_search(
            config, source, target, sem, emp, toy_corpora["test"], tmp_path / "work"
        )
        assert len(records) == 1
        assert records[0].status == "ok", records[0].detail
        assert 0.0 <= records[0].micro_f1 <= 1.0


class TestSpanScores:
    def test_exact_match_scoring(self):
        from nerfuse_adapter.formats import Sentence

        gold = [Sentence(id="s", tokens=list("abcd"), spans=[(0, 2, "X"), (3, 4, "Y")])]
        records = {"s": [(0, 2, "X"), (2, 3, "Y")]}
        scores = span_scores(gold, records)
        assert scores["micro_f1"] == pytest.approx(0.5)
        assert scores["per_label"]["X"] == 1.0
        assert scores["per_label"]["Y"] == 0.0
        assert set(scores["per_label"]) == {"X", "Y"}

    def test_agrees_with_toolkit_metrics(self, toy_corpora, fast_config, self_predictions):
        gold_name, gold_sentences = read_corpus(toy_corpora["train"])
        pred = parse_predictions_jsonl(self_predictions.read_text(encoding="utf-8"))
        records = {
            sid: [(s.start, s.end, s.label) for s in spans]
            for sid, spans in pred.records.items()
        }
        ours = span_scores(gold_sentences, records)
        gold = parse_bio(Path(toy_corpora["train"]).read_text(encoding="utf-8"), "train")
        theirs = label_report(gold, pred)
        assert ours["micro_f1"] == pytest.approx(theirs.micro_f1, abs=1e-12)
        for label, value in ours["per_label"].items():
            assert value == pytest.approx(theirs.rows[label]["f1"], abs=1e-12)
