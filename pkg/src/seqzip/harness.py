"""Experiment runner: train scorers and conditional models, emit reports."""

from __future__ import annotations

import json
import os
import statistics
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import lm as lm_mod
from .corpus import Corpus, Vocabulary, build_vocab, context_length, corpus_stats, read_lines
from .lm import LmConfig, LossTable, init_bilm, init_lm, per_token_losses, save_checkpoint, train_lm
from .metrics import (
    MetricsReport,
    adjusted_log_ppl,
    conditional_log_ppl,
    conditional_log_ppl_pooled,
    dsae,
    lead_upper_bound,
    unadjusted_log_ppl,
    zero_prefix_ppl,
)
from .scoring import (
    ScoreTable,
    lead_select_corpus,
    loss_scores,
    random_select_corpus,
    select_top_table,
    tfidf_scores,
)
from .transform import TransformedCorpus, transform_with_selection

DEFAULT_STRATEGIES = ["baseline", "lead", "random", "tfidf", "lm", "bilm"]


@dataclass
class ExperimentConfig:
    train_path: str
    test_path: str
    out_dir: str = "runs/default"
    l_max: Optional[int] = None  # None: fit to the longest sentence seen
    compression: float = 8.0  # K
    strategies: list[str] = field(default_factory=lambda: list(DEFAULT_STRATEGIES))
    model_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4
    steps: int = 800
    batch_size: int = 64
    learning_rate: float = 1e-3
    seed: int = 0
    subset: Optional[int] = None  # cap on training sentences

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(asdict(self), f, indent=2, sort_keys=True)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as f:
            return cls(**json.load(f))


def _load_splits(cfg: ExperimentConfig) -> tuple[Vocabulary, Corpus, Corpus]:
    train_lines = read_lines(cfg.train_path)
    if cfg.subset is not None:
        train_lines = train_lines[: cfg.subset]
    test_lines = read_lines(cfg.test_path)
    vocab = build_vocab(train_lines)
    l_max = cfg.l_max
    if l_max is None:
        longest = max(
            len(line.split()) for line in list(train_lines) + list(test_lines)
        )
        l_max = longest + 2
    train = Corpus.from_lines(vocab, train_lines, l_max)
    test = Corpus.from_lines(vocab, test_lines, l_max)
    return vocab, train, test


def _lm_config(cfg: ExperimentConfig, vocab_size: int, total_len: int, seed: int) -> LmConfig:
    return LmConfig(
        vocab_size=vocab_size,
        model_dim=cfg.model_dim,
        num_layers=cfg.num_layers,
        num_heads=cfg.num_heads,
        context_window=total_len,
        seed=seed,
    )


def _transformed_losses(model, tcorpus: TransformedCorpus, batch_size: int = 128) -> LossTable:
    chunks = [
        lm_mod.forward_nll(model, tcorpus.ids[i : i + batch_size])
        for i in range(0, len(tcorpus), batch_size)
    ]
    nll = np.concatenate(chunks, axis=0)
    flags = np.where(tcorpus.eval_masks, lm_mod.FLAG_CONTENT, lm_mod.FLAG_CONTEXT)
    return LossTable(nll, flags.astype(np.int8))


def train_conditional(
    cfg: ExperimentConfig,
    train_t: TransformedCorpus,
    test_t: TransformedCorpus,
    seed: int,
) -> tuple[float, float, object]:
    """Train a conditional LM on transformed data; returns (per-sentence,
    pooled) conditional log-ppl on the transformed test split."""
    model_cfg = _lm_config(cfg, len(train_t.vocab), train_t.ids.shape[1], seed)
    model = init_lm(model_cfg)
    train_lm(
        model,
        train_t.ids,
        steps=cfg.steps,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        loss_mask=train_t.eval_masks,
        seed=seed,
    )
    table = _transformed_losses(model, test_t)
    return (
        conditional_log_ppl(table, test_t.eval_masks),
        conditional_log_ppl_pooled(table, test_t.eval_masks),
        model,
    )


def _selections_for(strategy, split: Corpus, m: int, tables: dict, seed: int):
    if strategy == "lead":
        return lead_select_corpus(split, m)
    if strategy == "random":
        return random_select_corpus(split, m, seed)
    return select_top_table(tables[strategy], m)


def run_pipeline(cfg: ExperimentConfig, save_artifacts: bool = True) -> list[MetricsReport]:
    os.makedirs(cfg.out_dir, exist_ok=True)
    vocab, train, test = _load_splits(cfg)
    stats = corpus_stats(train)
    test_stats = corpus_stats(test)
    m = context_length(stats.max_len, cfg.compression)
    total_len = train.l_max + m + 1
    v = vocab.content_size

    # Baseline LM doubles as the scorer for the +LM strategy.
    base_cfg = _lm_config(cfg, len(vocab), total_len, cfg.seed)
    base = init_lm(base_cfg)
    train_lm(
        base, train.ids, cfg.steps, cfg.batch_size, cfg.learning_rate, seed=cfg.seed
    )
    base_test_table = per_token_losses(base, test)
    base_adj = adjusted_log_ppl(base_test_table)
    base_unadj = unadjusted_log_ppl(base_test_table)

    score_tables: dict[str, dict[str, ScoreTable]] = {}
    needed = set(cfg.strategies)
    if "tfidf" in needed:
        score_tables["tfidf"] = {
            "train": tfidf_scores(train),
            "test": tfidf_scores(test),
        }
    if "lm" in needed:
        score_tables["lm"] = {
            "train": loss_scores(per_token_losses(base, train), train.true_lens, "lm"),
            "test": loss_scores(base_test_table, test.true_lens, "lm"),
        }
    if "bilm" in needed:
        bi = init_bilm(_lm_config(cfg, len(vocab), total_len, cfg.seed + 1))
        train_lm(
            bi, train.ids, cfg.steps, cfg.batch_size, cfg.learning_rate, seed=cfg.seed + 1
        )
        score_tables["bilm"] = {
            "train": loss_scores(per_token_losses(bi, train), train.true_lens, "bilm"),
            "test": loss_scores(per_token_losses(bi, test), test.true_lens, "bilm"),
        }
        if save_artifacts:
            save_checkpoint(os.path.join(cfg.out_dir, "bilm.ckpt"), bi)

    rows: list[MetricsReport] = []
    for si, strategy in enumerate(cfg.strategies):
        if strategy == "baseline":
            rows.append(
                MetricsReport(
                    strategy="baseline",
                    unadjusted_log_ppl=base_unadj,
                    adjusted_log_ppl=base_adj,
                    dsae=0.0,
                    compression=cfg.compression,
                    vocab_size=v,
                    context_tokens=m,
                )
            )
            continue
        seed = cfg.seed + 100 + si
        sel_train = _selections_for(
            strategy, train, m, {k: t["train"] for k, t in score_tables.items()}, seed
        )
        sel_test = _selections_for(
            strategy, test, m, {k: t["test"] for k, t in score_tables.items()}, seed
        )
        train_t = transform_with_selection(train, sel_train, m)
        test_t = transform_with_selection(test, sel_test, m)
        cond, cond_pooled, model = train_conditional(cfg, train_t, test_t, seed)
        row = MetricsReport(
            strategy=strategy,
            conditional_log_ppl=cond,
            conditional_log_ppl_pooled=cond_pooled,
            adjusted_log_ppl=base_adj,
            dsae=dsae(cfg.compression, v, base_adj, cond),
            compression=cfg.compression,
            vocab_size=v,
            context_tokens=m,
        )
        if strategy == "lead":
            row.lead_bound = lead_upper_bound(base_adj, test_stats.avg_len, m)
            row.zero_prefix = zero_prefix_ppl(base_test_table, sel_test)
        rows.append(row)
        if save_artifacts:
            save_checkpoint(os.path.join(cfg.out_dir, f"cond_{strategy}.ckpt"), model)

    if save_artifacts:
        vocab.save(os.path.join(cfg.out_dir, "vocab.txt"))
        save_checkpoint(os.path.join(cfg.out_dir, "baseline.ckpt"), base)
        write_report(rows, cfg.out_dir)
    return rows


def context_sweep(
    cfg: ExperimentConfig, m_values: Sequence[int], seeds: Sequence[int]
) -> list[dict]:
    """Conditional log-ppl vs context size, one trained model per (M, seed).

    Selections nest across M (top-M prefixes of one ranking), so the sweep
    follows a chain of growing subsequences.
    """
    vocab, train, test = _load_splits(cfg)
    scores_train = tfidf_scores(train)
    scores_test = tfidf_scores(test)
    curve = []
    for m in m_values:
        sel_train = select_top_table(scores_train, m)
        sel_test = select_top_table(scores_test, m)
        train_t = transform_with_selection(train, sel_train, m)
        test_t = transform_with_selection(test, sel_test, m)
        vals = [
            train_conditional(cfg, train_t, test_t, seed)[0] for seed in seeds
        ]
        curve.append(
            {"m": int(m), "median": statistics.median(vals), "values": vals}
        )
    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "sweep.json"), "w", encoding="utf-8") as f:
        json.dump(curve, f, indent=2, sort_keys=True)
    return curve


def report_text(rows: Sequence[MetricsReport]) -> str:
    header = f"{'strategy':<10} {'cond':>8} {'adj':>8} {'unadj':>8} {'DSAE':>8}  {'K':>5} {'V':>6} {'M':>3}"
    lines = [header, "-" * len(header)]

    def cell(v, width=8):
        return f"{v:>{width}.3f}" if v is not None else " " * (width - 1) + "-"

    for r in rows:
        cond = cell(r.conditional_log_ppl)
        if r.strategy == "lead" and r.lead_bound is not None:
            cond = f"{r.conditional_log_ppl:.3f} (<{r.lead_bound:.2f})"
            cond = f"{cond:>8}"
        lines.append(
            f"{r.strategy:<10} {cond} {cell(r.adjusted_log_ppl)} "
            f"{cell(r.unadjusted_log_ppl)} {cell(r.dsae)}  "
            f"{r.compression or 0:>5.2f} {r.vocab_size or 0:>6d} {r.context_tokens or 0:>3d}"
        )
    return "\n".join(lines)


def write_report(rows: Sequence[MetricsReport], out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.jsonl"), "w", encoding="utf-8") as f:
        for r in rows:
            f.write(r.to_json() + "\n")
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as f:
        f.write(report_text(rows) + "\n")


def read_report(out_dir: str) -> list[MetricsReport]:
    with open(os.path.join(out_dir, "report.jsonl"), encoding="utf-8") as f:
        return [MetricsReport.from_json(line) for line in f if line.strip()]
