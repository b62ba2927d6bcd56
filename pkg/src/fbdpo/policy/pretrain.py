"""Next-token warm-start training for the base weights.

DPO needs a policy that already assigns sensible likelihoods; this
runs plain cross-entropy language modeling on a small corpus before
any preference training. Adapter tensors stay untouched so the
adapter-zero identity still holds afterwards.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F

from ..seeding import derive_seed
from .checkpoint import PolicyCheckpoint, checkpoint_from_model
from .model import ModelConfig, build_model
from .tokenizer import BOS, EOS


def _token_stream(corpus: list[str]) -> torch.Tensor:
    ids: list[int] = []
    for doc in corpus:
        ids.append(BOS)
        ids.extend(doc.encode("utf-8"))
        ids.append(EOS)
    return torch.tensor(ids, dtype=torch.long)


def pretrain_base(config: ModelConfig, corpus: list[str], steps: int,
                  lr: float = 3e-3, seed: int = 0, batch_size: int = 8) -> PolicyCheckpoint:
    """Train base weights by teacher-forced cross-entropy; adapters untouched."""
    if not corpus:
        raise ValueError("corpus must be nonempty")
    model = build_model(config, seed=seed)
    stream = _token_stream(corpus)
    block = min(config.context_len, 128)
    if stream.shape[0] < block + 1:
        repeats = (block + 1) // stream.shape[0] + 1
        stream = stream.repeat(repeats)
    generator = torch.Generator().manual_seed(derive_seed(seed, "pretrain"))
    base_params = [p for _, p in model.base_parameters()]
    for p in base_params:
        p.requires_grad_(True)
    optimizer = torch.optim.Adam(base_params, lr=lr)
    losses: list[float] = []
    model.train()
    for _ in range(steps):
        starts = torch.randint(0, stream.shape[0] - block, (batch_size,), generator=generator)
        windows = torch.stack([stream[s : s + block + 1] for s in starts])
        inputs, targets = windows[:, :-1], windows[:, 1:]
        logits = model(inputs, use_adapters=False)
        loss = F.cross_entropy(logits.reshape(-1, config.vocab_size), targets.reshape(-1))
        optimizer.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(base_params, 1.0)
        optimizer.step()
        losses.append(float(loss.detach()))
    for p in base_params:
        p.requires_grad_(False)
    model.eval()
    metadata = {
        "kind": "pretrained-base",
        "pretrain": {"steps": steps, "lr": lr, "seed": seed,
                     "batch_size": batch_size, "loss": losses},
    }
    return checkpoint_from_model(model, rng_state_label=seed, metadata=metadata)
