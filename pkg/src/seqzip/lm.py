"""Small autoregressive transformer LM and its two-tower bidirectional variant.

All negative log-likelihoods are in nats. The prediction-target convention
everywhere: for a padded row ``s`` of length L, entry ``j`` of an NLL vector
is the loss of target token ``s[j+1]`` (j = 0 .. L-2).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .corpus import Corpus, PAD

CHECKPOINT_VERSION = 1

FLAG_CONTENT = 0
FLAG_PAD = 1  # PAD and EOS targets: excluded from every perplexity denominator
FLAG_CONTEXT = 2

_FLAG_SUFFIX = {FLAG_CONTENT: "", FLAG_PAD: "p", FLAG_CONTEXT: "c"}


@dataclass
class LmConfig:
    vocab_size: int
    model_dim: int = 64
    num_layers: int = 2
    num_heads: int = 4
    context_window: int = 128
    seed: int = 0

    def validate(self) -> None:
        if self.model_dim < 8:
            raise ValueError("model_dim must be >= 8")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if self.model_dim % self.num_heads != 0:
            raise ValueError("model_dim must be divisible by num_heads")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")


class Block(nn.Module):
    """Pre-norm self-attention + MLP block."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(dim)
        self.attn = nn.MultiheadAttention(dim, heads, batch_first=True)
        self.ln2 = nn.LayerNorm(dim)
        self.mlp = nn.Sequential(
            nn.Linear(dim, 4 * dim), nn.GELU(), nn.Linear(4 * dim, dim)
        )

    def forward(self, x: torch.Tensor, attn_mask: torch.Tensor) -> torch.Tensor:
        h = self.ln1(x)
        a, _ = self.attn(h, h, h, attn_mask=attn_mask, need_weights=False)
        x = x + a
        return x + self.mlp(self.ln2(x))


class Tower(nn.Module):
    """Causal transformer stack producing hidden states, no output head."""

    def __init__(self, config: LmConfig):
        super().__init__()
        self.config = config
        self.tok_emb = nn.Embedding(config.vocab_size, config.model_dim)
        self.pos_emb = nn.Embedding(config.context_window, config.model_dim)
        self.blocks = nn.ModuleList(
            Block(config.model_dim, config.num_heads) for _ in range(config.num_layers)
        )
        self.ln_f = nn.LayerNorm(config.model_dim)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        n, length = ids.shape
        if length > self.config.context_window:
            raise ValueError(
                f"sequence length {length} exceeds context window "
                f"{self.config.context_window}"
            )
        pos = torch.arange(length, device=ids.device)
        x = self.tok_emb(ids) + self.pos_emb(pos)
        mask = torch.triu(
            torch.full((length, length), float("-inf"), device=ids.device), diagonal=1
        )
        for block in self.blocks:
            x = block(x, mask)
        return self.ln_f(x)


class TransformerLM(nn.Module):
    def __init__(self, config: LmConfig):
        super().__init__()
        config.validate()
        self.config = config
        self.tower = Tower(config)
        self.head = nn.Linear(config.model_dim, config.vocab_size)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        """Logits for the token at each position given strictly earlier tokens."""
        return self.head(self.tower(ids))


class BiLM(nn.Module):
    """Two independent causal towers (one on the reversed sequence) whose
    hidden states are concatenated before a single shared output head, so the
    prediction at position i sees tokens < i and tokens > i but never token i.
    """

    def __init__(self, config: LmConfig):
        super().__init__()
        config.validate()
        self.config = config
        self.fwd = Tower(config)
        self.bwd = Tower(config)
        self.head = nn.Linear(2 * config.model_dim, config.vocab_size)

    def forward(self, ids: torch.Tensor) -> torch.Tensor:
        """Logits for targets 1..L-1; output shape (n, L-1, vocab)."""
        n, length = ids.shape
        f = self.fwd(ids)  # f[:, t] sees ids[:, :t+1]
        b = self.bwd(ids.flip(1)).flip(1)  # b[:, t] sees ids[:, t:]
        zeros = torch.zeros_like(b[:, :1])
        b_after = torch.cat([b[:, 2:], zeros], dim=1)  # context > target t+1
        h = torch.cat([f[:, :-1], b_after], dim=-1)
        return self.head(h)


def init_lm(config: LmConfig) -> TransformerLM:
    """Deterministic construction: equal seeds give identical parameters."""
    torch.manual_seed(config.seed)
    return TransformerLM(config)


def init_bilm(config: LmConfig) -> BiLM:
    torch.manual_seed(config.seed)
    return BiLM(config)


class LossTable:
    """Per-sentence, per-target NLL vectors with content/pad/context flags."""

    def __init__(self, nll: np.ndarray, flags: np.ndarray):
        if nll.shape != flags.shape:
            raise ValueError("nll/flags shape mismatch")
        self.nll = nll  # (n, L-1) float64
        self.flags = flags  # (n, L-1) int8

    def __len__(self) -> int:
        return self.nll.shape[0]

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for i in range(len(self)):
                cells = [
                    f"{v:.6f}{_FLAG_SUFFIX[int(fl)]}"
                    for v, fl in zip(self.nll[i], self.flags[i])
                ]
                f.write(f"{i}\t" + " ".join(cells) + "\n")

    @classmethod
    def load(cls, path: str) -> "LossTable":
        rows, frows = [], []
        suffix_to_flag = {v: k for k, v in _FLAG_SUFFIX.items()}
        with open(path, encoding="utf-8") as f:
            for line in f:
                _, cells = line.rstrip("\n").split("\t")
                vals, flags = [], []
                for cell in cells.split(" "):
                    suffix = cell[-1] if cell[-1] in ("p", "c") else ""
                    vals.append(float(cell.rstrip("pc")))
                    flags.append(suffix_to_flag[suffix])
                rows.append(vals)
                frows.append(flags)
        return cls(np.array(rows, dtype=np.float64), np.array(frows, dtype=np.int8))


def target_flags(ids: np.ndarray, true_lens: np.ndarray) -> np.ndarray:
    """Flags for the targets ids[:, 1:] of an original (untransformed) corpus."""
    n, length = ids.shape
    flags = np.full((n, length - 1), FLAG_PAD, dtype=np.int8)
    for i, tl in enumerate(true_lens):
        flags[i, :tl] = FLAG_CONTENT
    return flags


@torch.no_grad()
def forward_nll(
    model: TransformerLM,
    ids: np.ndarray,
    condition_mask: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Per-target NLL vector(s); entry j is the loss of target ids[..., j+1].

    ``condition_mask`` marks target positions to be reported but flagged as
    context by the caller; it does not alter the values.
    """
    batched = ids.ndim == 2
    x = torch.from_numpy(np.atleast_2d(ids))
    logits = model(x)
    nll = F.cross_entropy(
        logits[:, :-1].reshape(-1, logits.shape[-1]),
        x[:, 1:].reshape(-1),
        reduction="none",
    ).reshape(x.shape[0], -1)
    out = nll.double().numpy()
    return out if batched else out[0]


@torch.no_grad()
def bi_forward_nll(model: BiLM, ids: np.ndarray) -> np.ndarray:
    """Per-target NLL under the two-tower model; same alignment as forward_nll."""
    batched = ids.ndim == 2
    x = torch.from_numpy(np.atleast_2d(ids))
    logits = model(x)
    nll = F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), x[:, 1:].reshape(-1), reduction="none"
    ).reshape(x.shape[0], -1)
    out = nll.double().numpy()
    return out if batched else out[0]


def train_lm(
    model: nn.Module,
    ids: np.ndarray,
    steps: int,
    batch_size: int,
    learning_rate: float = 1e-3,
    loss_mask: Optional[np.ndarray] = None,
    seed: int = 0,
    log_every: int = 50,
) -> list[tuple[int, float]]:
    """Minimize cross-entropy with Adam at a fixed learning rate.

    ``loss_mask`` (n, L-1) selects which targets contribute; None means every
    target including PAD ("all-tokens" mode). Returns the logged loss curve.
    Raises on NaN loss with the offending step index.
    """
    rng = np.random.default_rng(seed)
    torch.manual_seed(seed)
    data = torch.from_numpy(ids)
    mask = None if loss_mask is None else torch.from_numpy(loss_mask.astype(bool))
    opt = torch.optim.Adam(model.parameters(), lr=learning_rate)
    curve: list[tuple[int, float]] = []
    is_bilm = isinstance(model, BiLM)
    model.train()
    for step in range(steps):
        idx = rng.integers(0, len(data), size=batch_size)
        batch = data[idx]
        logits = model(batch)
        if not is_bilm:
            logits = logits[:, :-1]
        per_tok = F.cross_entropy(
            logits.reshape(-1, logits.shape[-1]),
            batch[:, 1:].reshape(-1),
            reduction="none",
        ).reshape(batch.shape[0], -1)
        if mask is not None:
            m = mask[idx]
            denom = m.sum()
            loss = (per_tok * m).sum() / denom.clamp(min=1)
        else:
            loss = per_tok.mean()
        if not torch.isfinite(loss):
            raise RuntimeError(f"training diverged (non-finite loss) at step {step}")
        opt.zero_grad()
        loss.backward()
        opt.step()
        if step % log_every == 0 or step == steps - 1:
            curve.append((step, loss.item()))
    model.eval()
    return curve


def per_token_losses(model: nn.Module, corpus: Corpus, batch_size: int = 128) -> LossTable:
    """Evaluate the trained model over a corpus, one NLL row per sentence."""
    fn = bi_forward_nll if isinstance(model, BiLM) else forward_nll
    chunks = [
        fn(model, corpus.ids[i : i + batch_size])
        for i in range(0, len(corpus), batch_size)
    ]
    nll = np.concatenate(chunks, axis=0)
    return LossTable(nll, target_flags(corpus.ids, corpus.true_lens))


def gradient_check(
    config: LmConfig,
    batch: np.ndarray,
    epsilon: float = 1e-4,
    num_coords: int = 60,
    seed: int = 0,
) -> float:
    """Max relative error between autograd and central finite differences.

    Runs in float64 on a random subsample of parameter coordinates.
    """
    model = init_lm(config).double()
    x = torch.from_numpy(np.atleast_2d(batch))

    def loss_fn() -> torch.Tensor:
        logits = model(x)
        return F.cross_entropy(
            logits[:, :-1].reshape(-1, logits.shape[-1]), x[:, 1:].reshape(-1)
        )

    loss = loss_fn()
    loss.backward()
    params = [p for p in model.parameters() if p.grad is not None]
    rng = np.random.default_rng(seed)
    worst = 0.0
    with torch.no_grad():
        for _ in range(num_coords):
            p = params[rng.integers(len(params))]
            flat = p.view(-1)
            gflat = p.grad.view(-1)
            k = int(rng.integers(flat.numel()))
            orig = flat[k].item()
            flat[k] = orig + epsilon
            up = loss_fn().item()
            flat[k] = orig - epsilon
            down = loss_fn().item()
            flat[k] = orig
            numeric = (up - down) / (2 * epsilon)
            analytic = gflat[k].item()
            rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-3)
            worst = max(worst, rel)
    return worst


def save_checkpoint(path: str, model: nn.Module) -> None:
    torch.save(
        {
            "version": CHECKPOINT_VERSION,
            "kind": "bilm" if isinstance(model, BiLM) else "lm",
            "config": asdict(model.config),
            "state": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path: str) -> nn.Module:
    blob = torch.load(path, weights_only=True)
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version: {blob.get('version')!r}")
    config = LmConfig(**blob["config"])
    model = BiLM(config) if blob["kind"] == "bilm" else TransformerLM(config)
    model.load_state_dict(blob["state"])
    model.eval()
    return model
