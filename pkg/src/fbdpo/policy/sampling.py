"""Nucleus (top-p) sampling and greedy decoding for the local policy."""

from __future__ import annotations

import torch

from ..backend import SamplingParams
from ..errors import ContextOverflow
from .model import TinyTransformer
from .tokenizer import ByteTokenizer


def sample_token(logits: torch.Tensor, temperature: float, top_p: float,
                 generator: torch.Generator | None) -> int:
    """Draw one token id from a 1-D logit vector.

    temperature 0 is greedy with lowest-id tie-break. Otherwise logits
    are temperature-scaled, the smallest probability prefix reaching
    cumulative mass top_p is kept, renormalized, and sampled.
    """
    if temperature == 0:
        # first index attaining the max, so ties break toward low ids
        return int((logits == logits.max()).nonzero()[0].item())
    probs = torch.softmax(logits.double() / temperature, dim=-1)
    sorted_probs, sorted_ids = torch.sort(probs, descending=True, stable=True)
    cumulative = torch.cumsum(sorted_probs, dim=-1)
    # smallest prefix with cumulative mass >= top_p always keeps >= 1 token
    cutoff = int(torch.searchsorted(cumulative, top_p, right=False).item())
    cutoff = min(cutoff, probs.shape[-1] - 1)
    kept = sorted_probs[: cutoff + 1]
    kept = kept / kept.sum()
    choice = int(torch.multinomial(kept, 1, generator=generator).item())
    return int(sorted_ids[choice].item())


def sample_tokens(model: TinyTransformer, prompt_ids: list[int],
                  params: SamplingParams, use_adapters: bool = True) -> list[int]:
    """Autoregressive decoding; stops at EOS, max_new_tokens, or context end."""
    context_len = model.config.context_len
    if len(prompt_ids) >= context_len:
        raise ContextOverflow(
            f"prompt of {len(prompt_ids)} tokens leaves no room in context of {context_len}")
    generator = torch.Generator().manual_seed(params.seed)
    was_training = model.training
    model.eval()
    ids = list(prompt_ids)
    completion: list[int] = []
    try:
        with torch.no_grad():
            for _ in range(params.max_new_tokens):
                if len(ids) > context_len:
                    break
                logits = model(torch.tensor(ids, dtype=torch.long), use_adapters)[0, -1]
                token = sample_token(logits, params.temperature, params.top_p, generator)
                if token == ByteTokenizer.eos:
                    break
                completion.append(token)
                ids.append(token)
    finally:
        model.train(was_training)
    return completion


def sample(model: TinyTransformer, tokenizer: ByteTokenizer, prompt: str,
           params: SamplingParams, use_adapters: bool = True) -> str:
    """Text-level sampling entry point used by the local backend."""
    prompt_ids = tokenizer.encode_prompt(prompt)
    return tokenizer.decode(sample_tokens(model, prompt_ids, params, use_adapters))
