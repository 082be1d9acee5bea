"""Corpus ingestion: vocabulary, sentence encoding, padding statistics."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

PAD = 0
BOS = 1
EOS = 2
SEP = 3
UNK = 4

RESERVED_TOKENS = ["<pad>", "<bos>", "<eos>", "<sep>", "<unk>"]
NUM_RESERVED = len(RESERVED_TOKENS)


class Vocabulary:
    """Bidirectional token<->id map with ids 0-4 reserved for special symbols."""

    def __init__(self, content_tokens: Sequence[str]):
        self.id_to_token: list[str] = list(RESERVED_TOKENS) + list(content_tokens)
        self.token_to_id: dict[str, int] = {
            tok: i for i, tok in enumerate(self.id_to_token)
        }
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def content_size(self) -> int:
        """Number of corpus words, excluding all five reserved symbols.

        This is the V that enters the compression-efficiency metric.
        """
        return len(self.id_to_token) - NUM_RESERVED

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK)

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(" ".join(RESERVED_TOKENS) + "\n")
            for tok in self.id_to_token[NUM_RESERVED:]:
                f.write(tok + "\n")

    @classmethod
    def load(cls, path: str) -> "Vocabulary":
        with open(path, encoding="utf-8") as f:
            header = f.readline().split()
            if header != RESERVED_TOKENS:
                raise ValueError(f"bad vocabulary header: {header!r}")
            return cls([line.rstrip("\n") for line in f])


@dataclass
class Sentence:
    """Fixed-length padded id sequence [BOS, w1..wl, EOS, PAD...]."""

    ids: np.ndarray  # shape (L_max,), int64
    true_len: int  # content words, excluding BOS/EOS/PAD


@dataclass
class CorpusStats:
    avg_len: float
    max_len: int
    pad_ratio: float
    adj_factor: float


def build_vocab(lines: Iterable[str], min_count: int = 1) -> Vocabulary:
    """Assign ids by descending frequency (ties lexicographic), starting at 5."""
    counts: Counter[str] = Counter()
    for line in lines:
        counts.update(line.split())
    if not counts:
        raise ValueError("empty corpus")
    kept = [t for t, c in counts.items() if c >= min_count]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocabulary(kept)


def encode_sentence(vocab: Vocabulary, line: str, l_max: int) -> Sentence:
    """BOS + word ids + EOS, truncated to l_max total, PAD-filled."""
    if l_max < 3:
        raise ValueError("l_max must be >= 3")
    words = line.split()
    content = [vocab.id_of(w) for w in words[: l_max - 2]]
    ids = np.full(l_max, PAD, dtype=np.int64)
    ids[0] = BOS
    ids[1 : 1 + len(content)] = content
    ids[1 + len(content)] = EOS
    return Sentence(ids=ids, true_len=len(content))


def decode_sentence(vocab: Vocabulary, sentence: Sentence) -> str:
    toks = sentence.ids[1 : 1 + sentence.true_len]
    return " ".join(vocab.id_to_token[i] for i in toks)


class Corpus:
    """Encoded sentence matrix (n, L_max) with per-sentence true lengths."""

    def __init__(self, vocab: Vocabulary, ids: np.ndarray, true_lens: np.ndarray):
        self.vocab = vocab
        self.ids = ids
        self.true_lens = true_lens

    def __len__(self) -> int:
        return self.ids.shape[0]

    @property
    def l_max(self) -> int:
        return self.ids.shape[1]

    def sentence(self, i: int) -> Sentence:
        return Sentence(ids=self.ids[i], true_len=int(self.true_lens[i]))

    @classmethod
    def from_lines(
        cls, vocab: Vocabulary, lines: Sequence[str], l_max: int
    ) -> "Corpus":
        sents = [encode_sentence(vocab, line, l_max) for line in lines]
        if not sents:
            raise ValueError("empty corpus")
        ids = np.stack([s.ids for s in sents])
        lens = np.array([s.true_len for s in sents], dtype=np.int64)
        return cls(vocab, ids, lens)


def read_lines(path: str) -> list[str]:
    with open(path, encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f if line.strip()]


def corpus_stats(corpus: Corpus) -> CorpusStats:
    """Padding statistics over content slots (BOS/EOS excluded throughout)."""
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    slots_per_sentence = corpus.l_max - 2
    total = len(corpus) * slots_per_sentence
    nonpad = int(corpus.true_lens.sum())
    if nonpad == 0:
        raise ValueError("corpus has no content tokens")
    return CorpusStats(
        avg_len=float(corpus.true_lens.mean()),
        max_len=int(corpus.true_lens.max()),
        pad_ratio=1.0 - nonpad / total,
        adj_factor=total / nonpad,
    )


def context_length(max_len: int, compression: float) -> int:
    """Context budget M = ceil(max_len / compression)."""
    if compression <= 0:
        raise ValueError("compression factor must be > 0")
    return math.ceil(max_len / compression)
