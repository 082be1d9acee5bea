"""Token informativeness scores and context-position selection strategies."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus
from .lm import FLAG_CONTENT, LossTable

STRATEGIES = ("tfidf", "lm", "bilm", "lead", "random")


@dataclass
class ScoreTable:
    """One score vector per sentence, aligned to content positions 0..true_len-1."""

    strategy: str
    rows: list[np.ndarray] = field(default_factory=list)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(f"# strategy={self.strategy}\n")
            for i, row in enumerate(self.rows):
                f.write(f"{i}\t" + " ".join(f"{v:.6f}" for v in row) + "\n")

    @classmethod
    def load(cls, path: str) -> "ScoreTable":
        with open(path, encoding="utf-8") as f:
            header = f.readline().strip()
            strategy = header.split("=", 1)[1]
            rows = []
            for line in f:
                _, cells = line.rstrip("\n").split("\t")
                rows.append(
                    np.array([float(c) for c in cells.split()] if cells else [])
                )
        return cls(strategy, rows)


@dataclass
class SelectionResult:
    """Ascending selected positions per sentence, for a target context size M."""

    m: int
    rows: list[np.ndarray] = field(default_factory=list)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for i, row in enumerate(self.rows):
                f.write(f"{i}\t{self.m}\t" + " ".join(str(p) for p in row) + "\n")

    @classmethod
    def load(cls, path: str) -> "SelectionResult":
        rows, m = [], 0
        with open(path, encoding="utf-8") as f:
            for line in f:
                _, m_str, cells = line.rstrip("\n").split("\t")
                m = int(m_str)
                rows.append(np.array([int(c) for c in cells.split()], dtype=np.int64))
        return cls(m, rows)


def tfidf_scores(corpus: Corpus) -> ScoreTable:
    """tf(t,d) * ln(N/df(t)) with each sentence as its own document.

    Identical tokens within a sentence share one score; BOS/EOS/PAD never
    receive a score (vectors cover content positions only).
    """
    n = len(corpus)
    if n == 0:
        raise ValueError("empty corpus")
    df: dict[int, int] = {}
    sentences = []
    for i in range(n):
        tl = int(corpus.true_lens[i])
        toks = corpus.ids[i, 1 : 1 + tl]
        sentences.append(toks)
        for t in set(toks.tolist()):
            df[t] = df.get(t, 0) + 1
    table = ScoreTable("tfidf")
    for toks in sentences:
        counts: dict[int, int] = {}
        for t in toks.tolist():
            counts[t] = counts.get(t, 0) + 1
        row = np.array(
            [counts[t] * math.log(n / df[t]) for t in toks.tolist()], dtype=np.float64
        )
        table.rows.append(row)
    return table


def loss_scores(table: LossTable, true_lens: np.ndarray, strategy: str = "lm") -> ScoreTable:
    """Score of content position i = NLL of that token as prediction target."""
    if len(table) != len(true_lens):
        raise ValueError("loss table / corpus length mismatch")
    out = ScoreTable(strategy)
    for i, tl in enumerate(true_lens):
        tl = int(tl)
        if tl > table.nll.shape[1] or np.any(table.flags[i, :tl] != FLAG_CONTENT):
            raise ValueError(f"loss table misaligned at sentence {i}")
        out.rows.append(table.nll[i, :tl].copy())
    return out


def select_top(scores: np.ndarray, m: int) -> np.ndarray:
    """Positions of the m highest scores, ascending; ties favor earlier positions."""
    if m < 0:
        raise ValueError("m must be >= 0")
    length = len(scores)
    if length <= m:
        return np.arange(length, dtype=np.int64)
    order = sorted(range(length), key=lambda i: (-scores[i], i))
    return np.array(sorted(order[:m]), dtype=np.int64)


def select_top_table(scores: ScoreTable, m: int) -> SelectionResult:
    return SelectionResult(m, [select_top(row, m) for row in scores.rows])


def lead_select(true_len: int, m: int) -> np.ndarray:
    return np.arange(min(m, true_len), dtype=np.int64)


def random_select(true_len: int, m: int, rng: np.random.Generator) -> np.ndarray:
    k = min(m, true_len)
    return np.sort(rng.choice(true_len, size=k, replace=False))


def lead_select_corpus(corpus: Corpus, m: int) -> SelectionResult:
    return SelectionResult(m, [lead_select(int(t), m) for t in corpus.true_lens])


def random_select_corpus(corpus: Corpus, m: int, seed: int) -> SelectionResult:
    rng = np.random.default_rng(seed)
    return SelectionResult(m, [random_select(int(t), m, rng) for t in corpus.true_lens])
