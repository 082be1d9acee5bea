"""Extractive text compression toolkit: score tokens, extract the most
informative ones per sentence, condition a language model on them, and
measure the conditional perplexity reduction."""

from .corpus import (
    BOS,
    EOS,
    PAD,
    SEP,
    UNK,
    Corpus,
    CorpusStats,
    Sentence,
    Vocabulary,
    build_vocab,
    context_length,
    corpus_stats,
    decode_sentence,
    encode_sentence,
)
from .harness import ExperimentConfig, context_sweep, report_text, run_pipeline
from .lm import (
    BiLM,
    LmConfig,
    LossTable,
    TransformerLM,
    bi_forward_nll,
    forward_nll,
    gradient_check,
    init_bilm,
    init_lm,
    per_token_losses,
    train_lm,
)
from .metrics import (
    MetricsReport,
    adjusted_log_ppl,
    conditional_log_ppl,
    dsae,
    lead_upper_bound,
    unadjusted_log_ppl,
    zero_prefix_ppl,
)
from .scoring import (
    ScoreTable,
    SelectionResult,
    lead_select,
    loss_scores,
    random_select,
    select_top,
    tfidf_scores,
)
from .transform import TransformedSample, eval_mask, transform_corpus, transform_sentence

__version__ = "0.1.0"
