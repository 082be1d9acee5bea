"""Build conditioned samples: selected tokens + separator + original sentence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus, PAD, SEP, context_length, corpus_stats
from .scoring import ScoreTable, SelectionResult, select_top_table


@dataclass
class TransformedSample:
    """Layout: [PAD slack][context tokens][SEP][original padded sentence].

    The slack keeps total length fixed at m_slots + 1 + L_max while the
    portion after SEP stays bit-identical to the original sentence.
    eval_mask[j] says the prediction target ids[j+1] is an original-sentence
    content token.
    """

    ids: np.ndarray
    eval_mask: np.ndarray  # bool, length len(ids) - 1
    ctx_len_actual: int
    m_slots: int

    @property
    def sep_index(self) -> int:
        return self.m_slots

    def original_ids(self) -> np.ndarray:
        return self.ids[self.m_slots + 1 :]


def transform_sentence(
    ids: np.ndarray, true_len: int, selection: np.ndarray, m_slots: int
) -> TransformedSample:
    """Prepend the selected tokens and a separator to the padded sentence."""
    selection = np.asarray(selection, dtype=np.int64)
    if len(selection) > m_slots:
        raise ValueError("selection exceeds context budget")
    if np.any(selection >= true_len) or np.any(selection < 0):
        raise ValueError("selection references a non-content position")
    if np.any(np.diff(selection) <= 0):
        raise ValueError("selection positions must be strictly ascending")
    ctx = ids[1 + selection]  # content token i lives at padded index i+1
    total = m_slots + 1 + len(ids)
    out = np.full(total, PAD, dtype=np.int64)
    slack = m_slots - len(ctx)
    out[slack : m_slots] = ctx
    out[m_slots] = SEP
    out[m_slots + 1 :] = ids
    mask = np.zeros(total - 1, dtype=bool)
    # targets x_1..x_{true_len} sit at indices m_slots+2 .. m_slots+1+true_len
    mask[m_slots + 1 : m_slots + 1 + true_len] = True
    return TransformedSample(out, mask, len(ctx), m_slots)


def eval_mask(sample: TransformedSample) -> np.ndarray:
    """Recompute the mask of original-content prediction targets."""
    orig = sample.original_ids()
    true_len = int(np.count_nonzero(orig != PAD)) - 2  # minus BOS, EOS
    mask = np.zeros(len(sample.ids) - 1, dtype=bool)
    mask[sample.m_slots + 1 : sample.m_slots + 1 + true_len] = True
    return mask


class TransformedCorpus:
    def __init__(
        self,
        vocab,
        ids: np.ndarray,
        eval_masks: np.ndarray,
        ctx_lens: np.ndarray,
        true_lens: np.ndarray,
        m_slots: int,
    ):
        self.vocab = vocab
        self.ids = ids
        self.eval_masks = eval_masks
        self.ctx_lens = ctx_lens
        self.true_lens = true_lens
        self.m_slots = m_slots

    def __len__(self) -> int:
        return self.ids.shape[0]

    def sample(self, i: int) -> TransformedSample:
        return TransformedSample(
            self.ids[i], self.eval_masks[i], int(self.ctx_lens[i]), self.m_slots
        )

    def save_text(self, path: str) -> None:
        """Corpus-format text: context words, literal <sep>, original words."""
        id2t = self.vocab.id_to_token
        with open(path, "w", encoding="utf-8") as f:
            for i in range(len(self)):
                ctx = self.ids[i, self.m_slots - self.ctx_lens[i] : self.m_slots]
                orig = self.ids[i, self.m_slots + 2 : self.m_slots + 2 + self.true_lens[i]]
                words = [id2t[t] for t in ctx] + ["<sep>"] + [id2t[t] for t in orig]
                f.write(" ".join(words) + "\n")


def transform_with_selection(
    corpus: Corpus, selection: SelectionResult, m_slots: int
) -> TransformedCorpus:
    samples = [
        transform_sentence(
            corpus.ids[i], int(corpus.true_lens[i]), selection.rows[i], m_slots
        )
        for i in range(len(corpus))
    ]
    return TransformedCorpus(
        corpus.vocab,
        np.stack([s.ids for s in samples]),
        np.stack([s.eval_mask for s in samples]),
        np.array([s.ctx_len_actual for s in samples], dtype=np.int64),
        corpus.true_lens.copy(),
        m_slots,
    )


def transform_corpus(
    corpus: Corpus, scores: ScoreTable, compression: float, m_slots: int | None = None
) -> TransformedCorpus:
    """Top-M transform of every sentence, M = ceil(max_len / compression)."""
    if m_slots is None:
        m_slots = context_length(corpus_stats(corpus).max_len, compression)
    selection = select_top_table(scores, m_slots)
    return transform_with_selection(corpus, selection, m_slots)
