"""Command-line entry points for the compression pipeline."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .corpus import Corpus, Vocabulary, build_vocab, context_length, corpus_stats, read_lines
from .harness import ExperimentConfig, context_sweep, read_report, report_text, run_pipeline, write_report
from .lm import init_lm, load_checkpoint, per_token_losses, save_checkpoint, train_lm
from .harness import _lm_config, _transformed_losses, train_conditional
from .metrics import adjusted_log_ppl, conditional_log_ppl, unadjusted_log_ppl
from .scoring import loss_scores, select_top_table, tfidf_scores
from .transform import transform_with_selection


def _load_corpus(vocab_path: str, corpus_path: str, l_max: int | None) -> Corpus:
    vocab = Vocabulary.load(vocab_path)
    lines = read_lines(corpus_path)
    if l_max is None:
        l_max = max(len(l.split()) for l in lines) + 2
    return Corpus.from_lines(vocab, lines, l_max)


def cmd_build_vocab(args) -> None:
    vocab = build_vocab(read_lines(args.corpus), min_count=args.min_count)
    vocab.save(args.out)
    print(f"wrote {len(vocab)} tokens ({vocab.content_size} content) to {args.out}")


def cmd_train_lm(args) -> None:
    cfg = ExperimentConfig.load(args.config)
    corpus = _load_corpus(args.vocab, args.corpus, cfg.l_max)
    model_cfg = _lm_config(cfg, len(corpus.vocab), corpus.l_max + 16, args.seed)
    model = init_lm(model_cfg)
    curve = train_lm(
        model, corpus.ids, cfg.steps, cfg.batch_size, cfg.learning_rate, seed=args.seed
    )
    save_checkpoint(args.out, model)
    print(f"final training loss {curve[-1][1]:.4f}; checkpoint at {args.out}")


def cmd_score(args) -> None:
    corpus = _load_corpus(args.vocab, args.corpus, args.l_max)
    if args.strategy == "tfidf":
        table = tfidf_scores(corpus)
    else:
        model = load_checkpoint(args.model)
        table = loss_scores(
            per_token_losses(model, corpus), corpus.true_lens, args.strategy
        )
    table.save(args.out)
    print(f"wrote {len(table.rows)} score rows to {args.out}")


def cmd_transform(args) -> None:
    from .scoring import ScoreTable

    corpus = _load_corpus(args.vocab, args.corpus, args.l_max)
    scores = ScoreTable.load(args.scores)
    m = args.m
    if m is None:
        m = context_length(corpus_stats(corpus).max_len, args.compression)
    tcorpus = transform_with_selection(corpus, select_top_table(scores, m), m)
    tcorpus.save_text(args.out)
    print(f"wrote {len(tcorpus)} transformed sentences (M={m}) to {args.out}")


def cmd_evaluate(args) -> None:
    corpus = _load_corpus(args.vocab, args.corpus, args.l_max)
    model = load_checkpoint(args.model)
    table = per_token_losses(model, corpus)
    print(f"adjusted_log_ppl   {adjusted_log_ppl(table):.4f}")
    print(f"unadjusted_log_ppl {unadjusted_log_ppl(table):.4f}")


def cmd_run(args) -> None:
    cfg = ExperimentConfig.load(args.config)
    if args.out:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.subset is not None:
        cfg.subset = args.subset
    if args.strategy:
        cfg.strategies = args.strategy
    rows = run_pipeline(cfg)
    print(report_text(rows))


def cmd_sweep(args) -> None:
    cfg = ExperimentConfig.load(args.config)
    if args.out:
        cfg.out_dir = args.out
    curve = context_sweep(cfg, args.m, args.seeds)
    for point in curve:
        print(f"M={point['m']:>3}  median conditional log-ppl {point['median']:.4f}")


def cmd_report(args) -> None:
    rows = read_report(args.run_dir)
    print(report_text(rows))


def main(argv: list[str] | None = None) -> int:
    p = argparse.ArgumentParser(prog="seqzip")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build-vocab", help="build a vocabulary file from a corpus")
    b.add_argument("corpus")
    b.add_argument("--min-count", type=int, default=1)
    b.add_argument("--out", required=True)
    b.set_defaults(fn=cmd_build_vocab)

    t = sub.add_parser("train-lm", help="train an unconditional LM")
    t.add_argument("corpus")
    t.add_argument("--vocab", required=True)
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(fn=cmd_train_lm)

    s = sub.add_parser("score", help="score tokens with tfidf or a trained model")
    s.add_argument("corpus")
    s.add_argument("--vocab", required=True)
    s.add_argument("--strategy", choices=["tfidf", "lm", "bilm"], default="tfidf")
    s.add_argument("--model")
    s.add_argument("--l-max", type=int, default=None)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_score)

    tr = sub.add_parser("transform", help="prepend top-M contexts to a corpus")
    tr.add_argument("corpus")
    tr.add_argument("--vocab", required=True)
    tr.add_argument("--scores", required=True)
    tr.add_argument("--m", type=int, default=None)
    tr.add_argument("--compression", type=float, default=8.0)
    tr.add_argument("--l-max", type=int, default=None)
    tr.add_argument("--out", required=True)
    tr.set_defaults(fn=cmd_transform)

    ev = sub.add_parser("evaluate", help="adjusted/unadjusted log-ppl of a model")
    ev.add_argument("corpus")
    ev.add_argument("--vocab", required=True)
    ev.add_argument("--model", required=True)
    ev.add_argument("--l-max", type=int, default=None)
    ev.set_defaults(fn=cmd_evaluate)

    r = sub.add_parser(
        "train-conditional",
        help="full pipeline for the configured strategies (alias: run)",
        aliases=["run"],
    )
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int, default=None)
    r.add_argument("--subset", type=int, default=None)
    r.add_argument("--strategy", action="append")
    r.add_argument("--out", default=None)
    r.set_defaults(fn=cmd_run)

    sw = sub.add_parser("sweep", help="conditional log-ppl vs context size")
    sw.add_argument("--config", required=True)
    sw.add_argument("--m", type=int, nargs="+", default=[0, 1, 3, 7, 14])
    sw.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    sw.add_argument("--out", default=None)
    sw.set_defaults(fn=cmd_sweep)

    rp = sub.add_parser("report", help="print the table for a finished run")
    rp.add_argument("run_dir")
    rp.set_defaults(fn=cmd_report)

    args = p.parse_args(argv)
    args.fn(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
