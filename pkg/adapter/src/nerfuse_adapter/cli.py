"""Command-line entry points for the adapter."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import DEFAULT_MODEL, AdapterConfig


class _Parser(argparse.ArgumentParser):
    # hook contract: every failure, including usage errors, exits 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_config_flags(parser):
    parser.add_argument("--model", default=DEFAULT_MODEL,
                        help="model hub id or local directory (default %(default)s)")
    parser.add_argument("--max-length", type=int, default=150,
                        help="max sub-token sequence length (default %(default)s)")
    parser.add_argument("--lr-encoder", type=float, default=3e-5,
                        help="encoder learning rate (default %(default)s)")
    parser.add_argument("--lr-head", type=float, default=3e-2,
                        help="classifier/CRF learning rate (default %(default)s)")
    parser.add_argument("--epochs", type=int, default=30,
                        help="fine-tuning epochs (default %(default)s)")
    parser.add_argument("--batch-size", type=int, default=32,
                        help="batch size (default %(default)s)")
    parser.add_argument("--seed", type=int, default=13, help="random seed (default %(default)s)")


def _config(args) -> AdapterConfig:
    return AdapterConfig(
        model=args.model,
        max_length=args.max_length,
        lr_encoder=args.lr_encoder,
        lr_head=args.lr_head,
        epochs=args.epochs,
        batch_size=args.batch_size,
        seed=args.seed,
    )


def _cmd_embed(args) -> int:
    from .embeddings import extract_embeddings

    count = extract_embeddings(args.corpus, args.out, _config(args))
    print(json.dumps({"entries": count, "out": args.out}))
    return 0


def _cmd_train_predict(args) -> int:
    from .training import train_predict

    restrict = set(args.labels.split(",")) if args.labels else None
    records = train_predict(args.train, args.predict, args.out, _config(args),
                            restrict_labels=restrict)
    print(json.dumps({"sentences": len(records),
                      "spans": sum(len(v) for v in records.values()),
                      "out": args.out}))
    return 0


def _cmd_eval_hook(args) -> int:
    from .evaluate import evaluator_hook

    result = evaluator_hook(args.train, args.test, _config(args))
    print(json.dumps(result, ensure_ascii=False))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="nerfuse-adapter",
        description="Transformer bridge to the nerfuse file and hook protocols.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="<command>")

    p = sub.add_parser("embed", help="extract per-entity contextual embeddings")
    p.add_argument("--corpus", required=True, help="BIO or span-JSONL corpus path")
    p.add_argument("--out", required=True, help="embedding JSONL output path")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("train-predict", help="fine-tune on one corpus, decode another")
    p.add_argument("--train", required=True, help="training corpus path")
    p.add_argument("--predict", required=True, help="corpus to decode")
    p.add_argument("--out", required=True, help="prediction JSONL output path")
    p.add_argument("--labels", default=None,
                   help="comma-separated labels to keep (pseudo-label mode)")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_train_predict)

    p = sub.add_parser("eval-hook", help="grid-search evaluator: train, test, print JSON")
    p.add_argument("--train", required=True, help="merged training corpus path")
    p.add_argument("--test", required=True, help="test corpus path")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_eval_hook)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    if not getattr(args, "func", None):
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except Exception as exc:  # hook contract: any failure is a nonzero exit
        print(f"error: {exc}", file=sys.stderr)
        return 1


def eval_hook_main(argv=None) -> int:
    """Direct entry point matching the evaluator hook contract."""
    parser = _Parser(
        prog="nerfuse-adapter-eval",
        description="Train on --train, evaluate on --test, print micro/per-label F1 as JSON.",
    )
    parser.add_argument("--train", required=True, help="merged training corpus path")
    parser.add_argument("--test", required=True, help="test corpus path")
    _add_config_flags(parser)
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING)
    try:
        from .evaluate import evaluator_hook

        result = evaluator_hook(args.train, args.test, _config(args))
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(result, ensure_ascii=False))
    return 0


if __name__ == "__main__":
    sys.exit(main())
