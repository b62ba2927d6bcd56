"""Desk-scale autoregressive transformer with low-rank adapters.

A byte-level pre-LN transformer small enough to train on a CPU, with
rank-r adapters on the attention query/key/value/output projections.
The frozen base model doubles as the reference policy: every forward
takes a use_adapters flag, and with freshly initialized adapters
(B = 0) both paths produce identical logits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

from ..errors import ContextOverflow
from .tokenizer import VOCAB_SIZE

_TARGET_ORDER = ("Wq", "Wk", "Wv", "Wo")

INIT_STD = 0.02


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int = VOCAB_SIZE
    context_len: int = 256
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    lora_rank: int = 16
    lora_alpha: float = 32.0
    lora_dropout: float = 0.05
    lora_targets: tuple[str, ...] = field(default=_TARGET_ORDER)

    def __post_init__(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.lora_rank < 1:
            raise ValueError(f"lora_rank must be >= 1, got {self.lora_rank}")
        unknown = set(self.lora_targets) - set(_TARGET_ORDER)
        if unknown:
            raise ValueError(f"unknown lora_targets {sorted(unknown)}")
        if not self.lora_targets:
            raise ValueError("lora_targets must be nonempty")
        # canonical order makes serialized configs byte-stable
        ordered = tuple(t for t in _TARGET_ORDER if t in self.lora_targets)
        object.__setattr__(self, "lora_targets", ordered)

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "context_len": self.context_len,
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_layers": self.n_layers,
            "lora_rank": self.lora_rank,
            "lora_alpha": self.lora_alpha,
            "lora_dropout": self.lora_dropout,
            "lora_targets": list(self.lora_targets),
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ModelConfig":
        raw = dict(raw)
        if "lora_targets" in raw:
            raw["lora_targets"] = tuple(raw["lora_targets"])
        return cls(**raw)


class LoRALinear(nn.Module):
    """Linear projection with a frozen base weight and an optional low-rank delta.

    Effective weight when the adapter is active: W + (alpha/r) * B @ A.
    The base weight never receives gradients; dropout regularizes the
    adapter input only, so the base path stays deterministic.
    """

    def __init__(self, d_in: int, d_out: int, rank: int, alpha: float,
                 dropout: float, with_adapter: bool):
        super().__init__()
        self.weight = nn.Parameter(torch.empty(d_out, d_in), requires_grad=False)
        self.with_adapter = with_adapter
        if with_adapter:
            self.lora_A = nn.Parameter(torch.empty(rank, d_in))
            self.lora_B = nn.Parameter(torch.empty(d_out, rank))
            self.scale = alpha / rank
            self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, use_adapters: bool) -> torch.Tensor:
        out = F.linear(x, self.weight)
        if use_adapters and self.with_adapter:
            delta = F.linear(F.linear(self.dropout(x), self.lora_A), self.lora_B)
            out = out + self.scale * delta
        return out


class Attention(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.n_heads = config.n_heads
        self.head_dim = config.d_model // config.n_heads
        def proj(name: str) -> LoRALinear:
            return LoRALinear(config.d_model, config.d_model, config.lora_rank,
                              config.lora_alpha, config.lora_dropout,
                              with_adapter=name in config.lora_targets)
        self.wq = proj("Wq")
        self.wk = proj("Wk")
        self.wv = proj("Wv")
        self.wo = proj("Wo")

    def forward(self, x: torch.Tensor, use_adapters: bool) -> torch.Tensor:
        batch, seq, d_model = x.shape
        def split(t: torch.Tensor) -> torch.Tensor:
            return t.view(batch, seq, self.n_heads, self.head_dim).transpose(1, 2)
        q = split(self.wq(x, use_adapters))
        k = split(self.wk(x, use_adapters))
        v = split(self.wv(x, use_adapters))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        causal = torch.triu(torch.ones(seq, seq, dtype=torch.bool, device=x.device), diagonal=1)
        scores = scores.masked_fill(causal, float("-inf"))
        weights = F.softmax(scores, dim=-1)
        merged = (weights @ v).transpose(1, 2).reshape(batch, seq, d_model)
        return self.wo(merged, use_adapters)


class Block(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.ln1 = nn.LayerNorm(config.d_model)
        self.attn = Attention(config)
        self.ln2 = nn.LayerNorm(config.d_model)
        self.fc1 = nn.Linear(config.d_model, 4 * config.d_model)
        self.fc2 = nn.Linear(4 * config.d_model, config.d_model)

    def forward(self, x: torch.Tensor, use_adapters: bool) -> torch.Tensor:
        x = x + self.attn(self.ln1(x), use_adapters)
        x = x + self.fc2(F.gelu(self.fc1(self.ln2(x))))
        return x


class TinyTransformer(nn.Module):
    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.token_emb = nn.Embedding(config.vocab_size, config.d_model)
        self.pos_emb = nn.Embedding(config.context_len, config.d_model)
        self.blocks = nn.ModuleList(Block(config) for _ in range(config.n_layers))
        self.ln_f = nn.LayerNorm(config.d_model)
        self.lm_head = nn.Linear(config.d_model, config.vocab_size, bias=False)

    def forward(self, ids: torch.Tensor, use_adapters: bool = True) -> torch.Tensor:
        if ids.dim() == 1:
            ids = ids.unsqueeze(0)
        seq = ids.shape[1]
        if seq > self.config.context_len:
            raise ContextOverflow(
                f"sequence of {seq} tokens exceeds context of {self.config.context_len}")
        positions = torch.arange(seq, device=ids.device)
        x = self.token_emb(ids) + self.pos_emb(positions)
        for block in self.blocks:
            x = block(x, use_adapters)
        return self.lm_head(self.ln_f(x))

    def adapter_parameters(self) -> list[tuple[str, nn.Parameter]]:
        return [(n, p) for n, p in self.named_parameters() if "lora_" in n]

    def base_parameters(self) -> list[tuple[str, nn.Parameter]]:
        return [(n, p) for n, p in self.named_parameters() if "lora_" not in n]


def init_weights(model: TinyTransformer, seed: int) -> None:
    """Deterministic initialization from an explicit generator.

    All weights N(0, 0.02), biases and LayerNorm offsets zero, LayerNorm
    gains one; adapter A matrices N(0, 0.02) and B matrices zero, so the
    adapter delta starts exactly at zero.
    """
    generator = torch.Generator().manual_seed(seed)

    def fill_normal(param: nn.Parameter) -> None:
        sample = torch.empty(param.shape, dtype=torch.float32)
        sample.normal_(mean=0.0, std=INIT_STD, generator=generator)
        with torch.no_grad():
            param.copy_(sample)

    # iteration over named_parameters is deterministic (registration order)
    for name, param in model.named_parameters():
        with torch.no_grad():
            if name.endswith("lora_B"):
                param.zero_()
            elif name.endswith("lora_A") or param.dim() >= 2:
                fill_normal(param)
            else:
                param.zero_()  # biases and LayerNorm offsets
    for module in model.modules():
        if isinstance(module, nn.LayerNorm):
            with torch.no_grad():
                module.weight.fill_(1.0)
                module.bias.zero_()


def build_model(config: ModelConfig, seed: int = 0,
                dtype: torch.dtype = torch.float32) -> TinyTransformer:
    model = TinyTransformer(config)
    init_weights(model, seed)
    if dtype is not torch.float32:
        model.to(dtype)
    for name, param in model.named_parameters():
        param.requires_grad_("lora_" in name)
    return model


def sequence_logprob_tensor(model: TinyTransformer, full_ids: torch.Tensor,
                            prompt_len: int, use_adapters: bool) -> torch.Tensor:
    """Differentiable sum of completion log-probabilities under teacher forcing.

    full_ids is one prompt+completion sequence; positions before
    prompt_len provide context only. Empty completions score 0.
    """
    total = full_ids.shape[-1]
    if prompt_len < 1:
        raise ValueError("prompt must contain at least the BOS token")
    if total > model.config.context_len:
        raise ContextOverflow(
            f"sequence of {total} tokens exceeds context of {model.config.context_len}")
    if total - prompt_len <= 0:
        return torch.zeros((), dtype=next(model.parameters()).dtype)
    inputs = full_ids[:-1].unsqueeze(0)
    logits = model(inputs, use_adapters=use_adapters)[0]
    log_probs = F.log_softmax(logits, dim=-1)
    targets = full_ids[prompt_len:]
    rows = torch.arange(prompt_len - 1, total - 1)
    return log_probs[rows, targets].sum()


def sequence_logprob(model: TinyTransformer, prompt_ids: list[int],
                     completion_ids: list[int], use_adapters: bool) -> float:
    """Non-differentiable scoring entry point; dropout disabled."""
    full = torch.tensor(prompt_ids + completion_ids, dtype=torch.long)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            value = sequence_logprob_tensor(model, full, len(prompt_ids), use_adapters)
    finally:
        model.train(was_training)
    return float(value)
