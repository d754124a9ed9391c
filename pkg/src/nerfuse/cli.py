"""Command-line pipeline entry point.

Every toolkit operation is a subcommand; where a single result object
exists it is printed as JSON on stdout, diagnostics go to stderr.  Exit
codes: 0 success, 1 usage error, 2 data error, 3 evaluator error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import corpus as corpus_mod
from . import gridsearch as grid_mod
from . import merge as merge_mod
from . import metrics as metrics_mod
from . import pathplan as path_mod
from . import semantic as semantic_mod
from . import synth as synth_mod
from .empirical import (
    SimilarityMatrix,
    empirical_matrix,
    matrix_sum,
    parse_predictions_jsonl,
)
from .errors import EvaluatorError, NerfuseError, ValidationError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_EVALUATOR = 3

CORPUS_FORMATS = ("bio", "jsonl")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI contract wants 1
    def error(self, message):
        raise _UsageError(message)


def _load_corpus(path: str, fmt: str | None, name: str | None, strict_bio: bool = False):
    p = Path(path)
    if fmt is None:
        fmt = "jsonl" if p.suffix in (".jsonl", ".json") else "bio"
    text = p.read_text(encoding="utf-8")
    corpus_name = name or p.stem
    if fmt == "bio":
        return corpus_mod.parse_bio(
            text, corpus_name, repair="strict" if strict_bio else "lenient"
        )
    return corpus_mod.parse_spans_jsonl(text, corpus_name)


def _dump_corpus(corpus, path: str, fmt: str | None):
    p = Path(path)
    if fmt is None:
        fmt = "jsonl" if p.suffix in (".jsonl", ".json") else "bio"
    if fmt == "bio":
        p.write_text(corpus_mod.serialize_bio(corpus), encoding="utf-8")
    else:
        p.write_text(corpus_mod.serialize_spans_jsonl(corpus), encoding="utf-8")


def _load_matrix(path: str) -> SimilarityMatrix:
    return SimilarityMatrix.from_json(Path(path).read_text(encoding="utf-8"))


def _print(payload):
    print(json.dumps(payload, ensure_ascii=False, indent=2))


# --- subcommand implementations -------------------------------------------


def _cmd_convert(args):
    corpus = _load_corpus(args.input, args.input_format, args.name, args.strict_bio)
    _dump_corpus(corpus, args.out, args.out_format)
    _print(
        {
            "name": corpus.name,
            "sentences": len(corpus),
            "spans": corpus.span_count(),
            "out": args.out,
        }
    )
    return EXIT_OK


def _cmd_schema(args):
    corpus = _load_corpus(args.input, args.input_format, args.name)
    payload = {"name": corpus.name, "labels": corpus.schema.counts}
    if args.min_count is not None:
        payload["retained"] = sorted(
            corpus_mod.low_frequency_filter(corpus.schema, args.min_count)
        )
    _print(payload)
    return EXIT_OK


def _cmd_empirical(args):
    pred = parse_predictions_jsonl(Path(args.pred).read_text(encoding="utf-8"))
    gold = _load_corpus(args.gold, args.gold_format, None)
    pred_counts: dict[str, int] = {}
    for spans in pred.records.values():
        for span in spans:
            pred_counts[span.label] = pred_counts.get(span.label, 0) + 1
    if args.min_count > 1:
        retained_source = {l for l, c in pred_counts.items() if c >= args.min_count}
        retained_target = corpus_mod.low_frequency_filter(gold.schema, args.min_count)
    else:
        retained_source = set(pred.schema)
        retained_target = gold.schema.labels()
    matrix = empirical_matrix(pred, gold, retained_source, retained_target)
    Path(args.out).write_text(matrix.to_json(), encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(matrix.to_csv(), encoding="utf-8")
    _print(
        {
            "kind": matrix.kind,
            "source_labels": len(matrix.source_labels),
            "target_labels": len(matrix.target_labels),
            "defined_cells": sum(1 for _ in matrix.defined_items()),
            "sum": matrix_sum(matrix),
            "out": args.out,
        }
    )
    return EXIT_OK


def _cmd_semantic(args):
    source, _ = semantic_mod.parse_embeddings_jsonl(
        Path(args.source_emb).read_text(encoding="utf-8")
    )
    target, _ = semantic_mod.parse_embeddings_jsonl(
        Path(args.target_emb).read_text(encoding="utf-8")
    )
    matrix = semantic_mod.semantic_matrix(source, target, centering=args.centering)
    Path(args.out).write_text(matrix.to_json(), encoding="utf-8")
    if args.csv:
        Path(args.csv).write_text(matrix.to_csv(), encoding="utf-8")
    _print(
        {
            "kind": matrix.kind,
            "source_labels": len(matrix.source_labels),
            "target_labels": len(matrix.target_labels),
            "defined_cells": sum(1 for _ in matrix.defined_items()),
            "out": args.out,
        }
    )
    return EXIT_OK


def _cmd_fuse(args):
    sem = _load_matrix(args.sem)
    emp = _load_matrix(args.emp)
    matrix = merge_mod.merged_matrix(sem, emp, args.lam, fallback=args.fallback)
    Path(args.out).write_text(matrix.to_json(), encoding="utf-8")
    _print(
        {
            "kind": matrix.kind,
            "lambda": args.lam,
            "defined_cells": sum(1 for _ in matrix.defined_items()),
            "out": args.out,
        }
    )
    return EXIT_OK


def _cmd_plan(args):
    sem = _load_matrix(args.sem)
    emp = _load_matrix(args.emp)
    plan = merge_mod.build_plan(
        sem, emp, args.lam, args.tau,
        fallback=args.fallback, equivalence_band=args.equivalence_band,
    )
    text = merge_mod.plan_to_json(plan)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text)
    return EXIT_OK


def _cmd_merge(args):
    source = _load_corpus(args.source, args.source_format, None)
    target = _load_corpus(args.target, args.target_format, None)
    plan = merge_mod.plan_from_json(Path(args.plan).read_text(encoding="utf-8"))
    merged, report = merge_mod.merge_datasets(
        source, target, plan, new_name=args.name, unmapped_policy=args.unmapped
    )
    _dump_corpus(merged, args.out, args.out_format)
    _print(
        {
            "name": merged.name,
            "sentences": len(merged),
            "merged_label_count": report.merged_label_count,
            "row_increment_abs": report.row_increment_abs,
            "row_increment_rel": report.row_increment_rel,
            "unmapped_source_labels": list(report.unmapped_source_labels),
            "out": args.out,
        }
    )
    return EXIT_OK


def _cmd_augment(args):
    target = _load_corpus(args.target, args.target_format, None)
    pseudo = parse_predictions_jsonl(Path(args.pseudo).read_text(encoding="utf-8"))
    labels = {l for l in args.labels.split(",") if l}
    augmented, report = merge_mod.augment_labels(target, pseudo, labels)
    _dump_corpus(augmented, args.out, args.out_format)
    _print(
        {
            "injected": report.injected,
            "discarded_overlap": report.discarded_overlap,
            "discarded_unrequested": report.discarded_unrequested,
            "out": args.out,
        }
    )
    return EXIT_OK


def _cmd_path(args):
    if bool(args.sums) == bool(args.synth):
        raise _UsageError("exactly one of --sums or --synth is required")
    if args.sums:
        try:
            payload = json.loads(Path(args.sums).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise NerfuseError(f"invalid sums file {args.sums!r}: {exc}") from exc
        sums = {}
        for key, value in payload.items():
            if "->" not in key:
                raise ValidationError(f"sums key {key!r} must look like 'source->target'")
            source, target = key.split("->", 1)
            sums[(source, target)] = float(value)
        names = args.names.split(",") if args.names else None
        if not names:
            raise _UsageError("--names is required with --sums")
        schedule = path_mod.greedy_schedule_from_sums(names, sums)
    else:
        spec = synth_mod.SynthSpec.from_json(Path(args.synth).read_text(encoding="utf-8"))
        corpora, _ = synth_mod.gen_corpora(spec)
        provider, merger = synth_mod.schedule_provider(spec)
        schedule = path_mod.greedy_schedule(
            [corpora[name] for name in sorted(corpora)], provider, merger=merger
        )
    text = schedule.to_json()
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    print(text)
    return EXIT_OK


@dataclass(frozen=True)
class PipelineConfig:
    """Validated grid-search pipeline configuration (see ``grid --help``)."""

    source_path: str
    target_path: str
    test_path: str
    semantic_matrix: str
    empirical_matrix: str
    work_dir: str
    search: grid_mod.SearchConfig
    source_format: str | None = None
    target_format: str | None = None


def load_pipeline_config(path: str) -> PipelineConfig:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise NerfuseError(f"cannot load config {path!r}: {exc}") from exc
    try:
        search = grid_mod.SearchConfig(
            baseline_f1=float(payload["baseline_f1"]),
            evaluator=tuple(payload["evaluator"]),
            lambda_grid=tuple(payload.get("lambda_grid", grid_mod.DEFAULT_LAMBDA_GRID)),
            tau_grid=tuple(payload.get("tau_grid", grid_mod.DEFAULT_TAU_GRID)),
            f1_tolerance=float(payload.get("f1_tolerance", 0.02)),
            tolerance_mode=payload.get("tolerance_mode", "relative"),
            jobs=int(payload.get("jobs", 1)),
            fallback=bool(payload.get("fallback", False)),
            unmapped_policy=payload.get("unmapped_policy", "retain"),
        )
        config = PipelineConfig(
            source_path=payload["source"],
            target_path=payload["target"],
            test_path=payload["test"],
            semantic_matrix=payload["semantic_matrix"],
            empirical_matrix=payload["empirical_matrix"],
            work_dir=payload.get("work_dir", "nerfuse-work"),
            search=search,
            source_format=payload.get("source_format"),
            target_format=payload.get("target_format"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise NerfuseError(f"invalid config {path!r}: {exc}") from exc
    for ref in (config.source_path, config.target_path, config.test_path,
                config.semantic_matrix, config.empirical_matrix):
        if not Path(ref).exists():
            raise NerfuseError(f"configured path does not exist: {ref}")
    return config


def _cmd_grid(args):
    config = load_pipeline_config(args.config)
    source = _load_corpus(config.source_path, config.source_format, None)
    target = _load_corpus(config.target_path, config.target_format, None)
    sem = _load_matrix(config.semantic_matrix)
    emp = _load_matrix(config.empirical_matrix)
    records = grid_mod.run_search(
        config.search, source, target, sem, emp, config.test_path, config.work_dir
    )
    work = Path(config.work_dir)
    (work / "trials.jsonl").write_text(grid_mod.trials_to_jsonl(records), encoding="utf-8")
    ok = [r for r in records if r.status == "ok"]
    if not ok:
        details = {r.detail for r in records}
        raise EvaluatorError(f"every grid cell failed evaluation: {sorted(details)}")
    selection = grid_mod.select_best(
        records,
        config.search.baseline_f1,
        config.search.f1_tolerance,
        mode=config.search.tolerance_mode,
    )
    summary = grid_mod.summary_json(records, selection)
    (work / "summary.json").write_text(summary, encoding="utf-8")
    print(summary)
    return EXIT_OK


def _cmd_eval(args):
    gold = _load_corpus(args.gold, args.gold_format, None)
    pred = parse_predictions_jsonl(Path(args.pred).read_text(encoding="utf-8"))
    report = metrics_mod.label_report(gold, pred)
    if args.text:
        sys.stdout.write(metrics_mod.report_to_text(report))
    else:
        print(metrics_mod.report_to_json(report))
    if args.out:
        Path(args.out).write_text(metrics_mod.report_to_json(report), encoding="utf-8")
    return EXIT_OK


def _cmd_synth(args):
    spec = synth_mod.SynthSpec.from_json(Path(args.spec).read_text(encoding="utf-8"))
    if args.seed is not None:
        spec = synth_mod.SynthSpec(
            concepts=spec.concepts,
            partitions=spec.partitions,
            confusion=spec.confusion,
            spans_per_label=spec.spans_per_label,
            embedding_dim=spec.embedding_dim,
            cluster_sigma=spec.cluster_sigma,
            seed=args.seed,
        )
    written = synth_mod.write_artifacts(spec, args.out)
    _print({"seed": spec.seed, "written": written})
    return EXIT_OK


# --- parser wiring ----------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(
        prog="nerfuse",
        description="Align NER label schemas across datasets and build a unified corpus.",
    )
    sub = parser.add_subparsers(dest="command", metavar="<command>")

    p = sub.add_parser("convert", help="convert a corpus between BIO and span-JSONL")
    p.add_argument("--in", dest="input", required=True, help="input corpus path")
    p.add_argument("--in-format", dest="input_format", choices=CORPUS_FORMATS, default=None,
                   help="input format (default: by extension)")
    p.add_argument("--out", required=True, help="output corpus path")
    p.add_argument("--out-format", choices=CORPUS_FORMATS, default=None,
                   help="output format (default: by extension)")
    p.add_argument("--name", default=None, help="corpus name (default: input stem)")
    p.add_argument("--strict-bio", action="store_true",
                   help="fail on orphan I- tags instead of repairing them")
    p.set_defaults(func=_cmd_convert)

    p = sub.add_parser("schema", help="print the label schema of a corpus")
    p.add_argument("--in", dest="input", required=True, help="corpus path")
    p.add_argument("--in-format", dest="input_format", choices=CORPUS_FORMATS, default=None,
                   help="input format (default: by extension)")
    p.add_argument("--name", default=None, help="corpus name (default: input stem)")
    p.add_argument("--min-count", type=int, default=None,
                   help="also list labels retained at this frequency threshold")
    p.set_defaults(func=_cmd_schema)

    p = sub.add_parser("empirical", help="empirical similarity matrix from predictions")
    p.add_argument("--pred", required=True, help="prediction JSONL over the gold corpus")
    p.add_argument("--gold", required=True, help="gold target corpus path")
    p.add_argument("--gold-format", choices=CORPUS_FORMATS, default=None,
                   help="gold format (default: by extension)")
    p.add_argument("--out", required=True, help="matrix JSON output path")
    p.add_argument("--csv", default=None, help="optional CSV export path")
    p.add_argument("--min-count", type=int, default=5,
                   help="low-frequency label pre-filter threshold (default 5)")
    p.set_defaults(func=_cmd_empirical)

    p = sub.add_parser("semantic", help="semantic similarity matrix from embeddings")
    p.add_argument("--source-emb", required=True, help="source embedding JSONL")
    p.add_argument("--target-emb", required=True, help="target embedding JSONL")
    p.add_argument("--out", required=True, help="matrix JSON output path")
    p.add_argument("--csv", default=None, help="optional CSV export path")
    p.add_argument("--centering", choices=semantic_mod.CENTERING_MODES, default="global",
                   help="embedding centering mode (default global)")
    p.set_defaults(func=_cmd_semantic)

    p = sub.add_parser("fuse", help="fuse semantic and empirical matrices")
    p.add_argument("--sem", required=True, help="semantic matrix JSON")
    p.add_argument("--emp", required=True, help="empirical matrix JSON")
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="empirical weight in [0, 1]")
    p.add_argument("--out", required=True, help="merged matrix output path")
    p.add_argument("--fallback", action="store_true",
                   help="substitute the defined side when one similarity is undefined")
    p.set_defaults(func=_cmd_fuse)

    p = sub.add_parser("plan", help="build a threshold-gated label mapping plan")
    p.add_argument("--sem", required=True, help="semantic matrix JSON")
    p.add_argument("--emp", required=True, help="empirical matrix JSON")
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="empirical weight in [0, 1]")
    p.add_argument("--tau", type=float, required=True, help="merge threshold in [0, 1]")
    p.add_argument("--out", default=None, help="optional plan JSON output path")
    p.add_argument("--fallback", action="store_true",
                   help="substitute the defined side when one similarity is undefined")
    p.add_argument("--equivalence-band", type=float, default=merge_mod.DEFAULT_EQUIVALENCE_BAND,
                   help="fused score at or above which a mapping is hinted as equivalence")
    p.set_defaults(func=_cmd_plan)

    p = sub.add_parser("merge", help="apply a plan and concatenate source onto target")
    p.add_argument("--source", required=True, help="source corpus path")
    p.add_argument("--source-format", choices=CORPUS_FORMATS, default=None,
                   help="source format (default: by extension)")
    p.add_argument("--target", required=True, help="target corpus path")
    p.add_argument("--target-format", choices=CORPUS_FORMATS, default=None,
                   help="target format (default: by extension)")
    p.add_argument("--plan", required=True, help="plan JSON path")
    p.add_argument("--out", required=True, help="merged corpus output path")
    p.add_argument("--out-format", choices=CORPUS_FORMATS, default=None,
                   help="output format (default: by extension)")
    p.add_argument("--name", default=None, help="merged corpus name (default: <target>M)")
    p.add_argument("--unmapped", choices=merge_mod.UNMAPPED_POLICIES, default="retain",
                   help="what to do with unmapped source labels (default retain)")
    p.set_defaults(func=_cmd_merge)

    p = sub.add_parser("augment", help="inject pseudo-label spans for missing labels")
    p.add_argument("--target", required=True, help="target corpus path")
    p.add_argument("--target-format", choices=CORPUS_FORMATS, default=None,
                   help="target format (default: by extension)")
    p.add_argument("--pseudo", required=True, help="pseudo-label prediction JSONL")
    p.add_argument("--labels", required=True, help="comma-separated labels to inject")
    p.add_argument("--out", required=True, help="augmented corpus output path")
    p.add_argument("--out-format", choices=CORPUS_FORMATS, default=None,
                   help="output format (default: by extension)")
    p.set_defaults(func=_cmd_augment)

    p = sub.add_parser("path", help="plan the greedy dataset merge order")
    p.add_argument("--sums", default=None,
                   help="JSON file of pair sums {'source->target': value, ...}")
    p.add_argument("--names", default=None,
                   help="comma-separated dataset names (required with --sums)")
    p.add_argument("--synth", default=None,
                   help="synth spec JSON; schedules its generated corpora via the oracle")
    p.add_argument("--out", default=None, help="optional schedule JSON output path")
    p.set_defaults(func=_cmd_path)

    p = sub.add_parser("grid", help="sweep (lambda, tau) with an external evaluator")
    p.add_argument("--config", required=True, help="pipeline config JSON path")
    p.set_defaults(func=_cmd_grid)

    p = sub.add_parser("eval", help="span-level F1 report of predictions against gold")
    p.add_argument("--gold", required=True, help="gold corpus path")
    p.add_argument("--gold-format", choices=CORPUS_FORMATS, default=None,
                   help="gold format (default: by extension)")
    p.add_argument("--pred", required=True, help="prediction JSONL path")
    p.add_argument("--text", action="store_true", help="print an aligned text table")
    p.add_argument("--out", default=None, help="optional JSON report output path")
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("synth", help="generate synthetic corpora with planted relations")
    p.add_argument("--spec", required=True, help="synth spec JSON path")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.set_defaults(func=_cmd_synth)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            parser.print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except EvaluatorError as exc:
        print(f"evaluator error: {exc}", file=sys.stderr)
        return EXIT_EVALUATOR
    except NerfuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
