"""Synthetic news-like corpus with topical keyword structure.

Sentences are built from short segments. Each segment draws a hidden topic;
the topic fixes a small pool of interchangeable rare keywords (one is placed
at a random position inside the segment) and a small filler set the remaining
segment tokens are drawn from without replacement and emitted in canonical
order, so a segment is nearly deterministic once its keyword is known.
Keywords are rare corpus-wide and pin their segment's topic exactly, so the
handful of keywords carries most of a sentence's information. A left-to-right
model sees high surprise at every segment opening, keyword or not, while
looking at both sides singles out the keywords (the interchangeable choice
stays uncertain even given the rest of the segment). Length statistics are
tuned to resemble a news corpus (mean ~27 words, hard cap at 51).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class SynthConfig:
    num_topics: int = 50
    keyword_choices: int = 4  # interchangeable keywords per topic
    filler_vocab: int = 50
    filler_subset: int = 4  # fillers usable by one topic
    mean_len: float = 27.15
    sd_len: float = 9.0
    min_len: int = 6
    max_len: int = 51
    seg_len_low: int = 5  # includes the keyword
    seg_len_high: int = 5
    structure_seed: int = 0  # fixes the topic->filler map across splits


def generate_corpus(n: int, seed: int, config: SynthConfig | None = None) -> list[str]:
    cfg = config or SynthConfig()
    rng = np.random.default_rng(seed)
    subsets = np.random.default_rng(cfg.structure_seed).integers(
        0, cfg.filler_vocab, size=(cfg.num_topics, cfg.filler_subset)
    )
    lines = []
    for _ in range(n):
        length = int(round(rng.normal(cfg.mean_len, cfg.sd_len)))
        length = max(cfg.min_len, min(cfg.max_len, length))
        words: list[str] = []
        remaining = length
        while remaining > 0:
            seg = int(rng.integers(cfg.seg_len_low, cfg.seg_len_high + 1))
            seg = min(seg, remaining)
            topic = int(rng.integers(cfg.num_topics))
            kw_pos = int(rng.integers(seg))
            fillers = np.sort(
                rng.choice(
                    subsets[topic], size=min(seg - 1, cfg.filler_subset), replace=False
                )
            )
            fi = 0
            for j in range(seg):
                if j == kw_pos:
                    choice = int(rng.integers(cfg.keyword_choices))
                    words.append(f"kw{topic}x{choice}")
                else:
                    words.append(f"f{fillers[fi % len(fillers)]}")
                    fi += 1
            remaining -= seg
        lines.append(" ".join(words))
    return lines


def write_corpus(path: str, n: int, seed: int, config: SynthConfig | None = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for line in generate_corpus(n, seed, config):
            f.write(line + "\n")
