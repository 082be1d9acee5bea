"""Perplexity accounting and compression-efficiency metrics (all in nats)."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .lm import FLAG_CONTENT, LossTable
from .scoring import SelectionResult


@dataclass
class MetricsReport:
    strategy: str
    unadjusted_log_ppl: Optional[float] = None
    adjusted_log_ppl: Optional[float] = None
    conditional_log_ppl: Optional[float] = None
    conditional_log_ppl_pooled: Optional[float] = None
    dsae: Optional[float] = None
    compression: Optional[float] = None  # K
    vocab_size: Optional[int] = None  # V
    context_tokens: Optional[int] = None  # M
    lead_bound: Optional[float] = None
    zero_prefix: Optional[float] = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(**json.loads(text))


def unadjusted_log_ppl(table: LossTable) -> float:
    """Mean NLL over every target position, zero-padding targets included."""
    if table.nll.size == 0:
        raise ValueError("empty loss table")
    return float(table.nll.mean())


def adjusted_log_ppl(table: LossTable) -> float:
    """Mean NLL over content targets only."""
    content = table.flags == FLAG_CONTENT
    if not content.any():
        raise ValueError("loss table has no content targets")
    return float(table.nll[content].mean())


def conditional_log_ppl(table: LossTable, masks: np.ndarray) -> float:
    """Per-sentence mean NLL over masked targets, then averaged over sentences."""
    if masks.shape != table.nll.shape:
        raise ValueError("mask / loss table shape mismatch")
    counts = masks.sum(axis=1)
    if np.any(counts == 0):
        raise ValueError("sentence with empty evaluation mask")
    per_sentence = (table.nll * masks).sum(axis=1) / counts
    return float(per_sentence.mean())


def conditional_log_ppl_pooled(table: LossTable, masks: np.ndarray) -> float:
    """Pooled-token variant, comparable with adjusted_log_ppl."""
    if masks.shape != table.nll.shape:
        raise ValueError("mask / loss table shape mismatch")
    total = masks.sum()
    if total == 0:
        raise ValueError("empty evaluation mask")
    return float((table.nll * masks).sum() / total)


def dsae(compression: float, vocab_size: int, log_p: float, log_p_prime: float) -> float:
    """Compression-weighted perplexity reduction per latent symbol:
    K * (log_p - log_p') / ln(V).
    """
    if vocab_size < 2:
        raise ValueError("vocab_size must be >= 2")
    if compression <= 0:
        raise ValueError("compression factor must be > 0")
    return compression * (log_p - log_p_prime) / math.log(vocab_size)


def lead_upper_bound(base_log_ppl: float, avg_len: float, ctx_len: int) -> float:
    """(avg_len - ctx_len) * base / avg_len: prefix-conditioned loss with the
    prefix positions scored as exactly zero."""
    if ctx_len < 0 or ctx_len > avg_len:
        raise ValueError("ctx_len must lie in [0, avg_len]")
    return (avg_len - ctx_len) * base_log_ppl / avg_len


def zero_prefix_ppl(table: LossTable, selections: SelectionResult) -> float:
    """Adjusted log-ppl with the selected positions' losses zeroed out but
    still counted in the denominator."""
    if len(table) != len(selections.rows):
        raise ValueError("loss table / selections length mismatch")
    total = 0.0
    count = 0
    for i, sel in enumerate(selections.rows):
        content = table.flags[i] == FLAG_CONTENT
        tl = int(content.sum())
        if len(sel) and (sel.max() >= tl):
            raise ValueError(f"selection out of range at sentence {i}")
        row = table.nll[i, :tl].copy()
        row[sel] = 0.0
        total += row.sum()
        count += tl
    if count == 0:
        raise ValueError("no content targets")
    return total / count
