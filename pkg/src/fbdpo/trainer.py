"""Weighted direct preference optimization over adapter parameters.

The loss for one pair is -ln sigmoid(beta * [(logp_chosen_policy -
logp_chosen_ref) - (logp_rejected_policy - logp_rejected_ref)]),
computed in the stable softplus form. Pair losses are combined as a
weighted mean where each pair's weight is its dataset weight times a
per-direction factor (w_f for solution pairs, w_b for verification
pairs); the unnormalized weighted sum is available behind a config
switch. Only adapter tensors receive gradients; the frozen base model
is simultaneously the reference policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import torch
import torch.nn.functional as F

from .datagen import PreferencePair
from .errors import ContextOverflow, FbdpoError
from .policy import (
    ByteTokenizer,
    PolicyCheckpoint,
    TinyTransformer,
    checkpoint_from_model,
    sequence_logprob_tensor,
)
from .seeding import derive_seed


class AllWeightsZero(FbdpoError):
    """Every pair in the batch has an effective weight of zero."""


class NonFiniteLoss(FbdpoError):
    """Training produced a NaN or infinite loss."""


@dataclass(frozen=True)
class TrainConfig:
    beta: float = 0.1
    learning_rate: float = 3e-4
    warmup_ratio: float = 0.05
    weight_decay: float = 0.01
    micro_batch: int = 1
    accumulation: int = 16
    epochs: int = 1
    w_f: float = 1.0
    w_b: float = 1.0
    seed: int = 0
    normalize_weights: bool = True

    def __post_init__(self) -> None:
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= self.warmup_ratio < 1:
            raise ValueError("warmup_ratio must lie in [0, 1)")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.micro_batch < 1 or self.accumulation < 1 or self.epochs < 1:
            raise ValueError("micro_batch, accumulation, and epochs must be >= 1")
        if self.w_f < 0 or self.w_b < 0:
            raise ValueError("w_f and w_b must be nonnegative")
        if self.w_f + self.w_b == 0:
            raise ValueError("at least one of w_f, w_b must be positive")

    @property
    def effective_batch(self) -> int:
        return self.micro_batch * self.accumulation

    def kind_weight(self, kind: str) -> float:
        return self.w_f if kind == "forward" else self.w_b


@dataclass(frozen=True)
class StepLog:
    step: int
    loss: float
    mean_reward_margin: float
    chosen_reward: float
    rejected_reward: float
    lr: float


CSV_HEADER = "step,loss,margin,chosen_reward,rejected_reward,lr"


def steplog_to_csv(logs: Iterable[StepLog]) -> str:
    lines = [CSV_HEADER]
    for row in logs:
        lines.append(f"{row.step},{row.loss:.10g},{row.mean_reward_margin:.10g},"
                     f"{row.chosen_reward:.10g},{row.rejected_reward:.10g},{row.lr:.10g}")
    return "\n".join(lines) + "\n"


def dpo_loss(logp_chosen_policy, logp_chosen_ref, logp_rejected_policy,
             logp_rejected_ref, beta: float):
    """Single-pair preference loss and reward margin.

    Works on floats and on torch tensors alike; tensor inputs keep the
    computation differentiable. The margin is the difference of
    implicit rewards, h / beta.
    """
    tensor_input = any(isinstance(v, torch.Tensor) for v in
                       (logp_chosen_policy, logp_chosen_ref,
                        logp_rejected_policy, logp_rejected_ref))
    margin = (logp_chosen_policy - logp_chosen_ref) - (logp_rejected_policy - logp_rejected_ref)
    if tensor_input:
        loss = F.softplus(-beta * margin)
        return loss, margin
    h = torch.tensor(beta * margin, dtype=torch.float64)
    return float(F.softplus(-h)), margin


LogProbs = tuple  # (chosen_policy, chosen_ref, rejected_policy, rejected_ref)


def weighted_batch_loss(scored: Sequence[tuple[PreferencePair, LogProbs]],
                        beta: float, w_f: float, w_b: float,
                        normalize: bool = True):
    """Combine per-pair losses with dataset and direction weights.

    Zero-weight pairs contribute to neither the numerator nor the
    denominator, so a direction can be switched off entirely.
    """
    if not scored:
        raise ValueError("scored pair list must be nonempty")
    total = None
    denominator = 0.0
    for pair, logprobs in scored:
        kind_weight = w_f if pair.kind == "forward" else w_b
        omega = pair.weight * kind_weight
        if omega == 0:
            continue
        loss, _ = dpo_loss(*logprobs, beta=beta)
        term = omega * loss
        total = term if total is None else total + term
        denominator += omega
    if total is None:
        raise AllWeightsZero("every pair in the batch has effective weight zero")
    return total / denominator if normalize else total


@dataclass(frozen=True)
class _TokenizedPair:
    pair: PreferencePair
    chosen_ids: torch.Tensor
    rejected_ids: torch.Tensor
    prompt_len: int
    omega: float


def _tokenize_pairs(pairs: Sequence[PreferencePair], config: TrainConfig,
                    context_len: int) -> list[_TokenizedPair]:
    tokenizer = ByteTokenizer()
    out = []
    for pair in pairs:
        prompt_ids = tokenizer.encode_prompt(pair.prompt)
        chosen = torch.tensor(prompt_ids + tokenizer.encode_completion(pair.chosen),
                              dtype=torch.long)
        rejected = torch.tensor(prompt_ids + tokenizer.encode_completion(pair.rejected),
                                dtype=torch.long)
        longest = max(chosen.shape[0], rejected.shape[0])
        if longest > context_len:
            raise ContextOverflow(
                f"pair {pair.id}: {longest} tokens exceed context of {context_len}")
        out.append(_TokenizedPair(pair=pair, chosen_ids=chosen, rejected_ids=rejected,
                                  prompt_len=len(prompt_ids),
                                  omega=pair.weight * config.kind_weight(pair.kind)))
    return out


def _reference_logprobs(model: TinyTransformer,
                        items: Sequence[_TokenizedPair]) -> list[tuple[float, float]]:
    """Score every pair under the frozen base once; exact to cache."""
    was_training = model.training
    model.eval()
    refs = []
    try:
        with torch.no_grad():
            for item in items:
                ref_c = float(sequence_logprob_tensor(
                    model, item.chosen_ids, item.prompt_len, use_adapters=False))
                ref_r = float(sequence_logprob_tensor(
                    model, item.rejected_ids, item.prompt_len, use_adapters=False))
                refs.append((ref_c, ref_r))
    finally:
        model.train(was_training)
    return refs


def active_pairs(pairs: Sequence[PreferencePair], config: TrainConfig) -> list[PreferencePair]:
    """Drop pairs whose effective weight is zero.

    Filtering happens before any shuffling or batching, so switching a
    direction off is indistinguishable from deleting its pairs from
    the input file.
    """
    return [p for p in pairs if p.weight * config.kind_weight(p.kind) > 0]


def _lr_factor(step: int, total_steps: int, warmup_steps: int) -> float:
    if step < warmup_steps:
        return (step + 1) / warmup_steps
    return (total_steps - step) / max(1, total_steps - warmup_steps)


def train(checkpoint: PolicyCheckpoint, pairs: Sequence[PreferencePair],
          config: TrainConfig) -> tuple[PolicyCheckpoint, list[StepLog]]:
    """Run weighted preference optimization; returns new checkpoint and logs.

    Deterministic: identical (checkpoint, pairs, config) give identical
    output bytes. Base tensors pass through untouched.
    """
    model = checkpoint.build()
    torch.manual_seed(config.seed)  # governs adapter dropout draws
    active = active_pairs(pairs, config)
    if not active:
        out = checkpoint_from_model(model, rng_state_label=config.seed,
                                    metadata=_train_metadata(checkpoint, config, 0, 0))
        return out, []
    items = _tokenize_pairs(active, config, model.config.context_len)
    refs = _reference_logprobs(model, items)
    adapter_params = [p for _, p in model.adapter_parameters()]
    optimizer = torch.optim.AdamW(adapter_params, lr=config.learning_rate,
                                  weight_decay=config.weight_decay)
    n = len(items)
    steps_per_epoch = math.ceil(n / config.effective_batch)
    total_steps = config.epochs * steps_per_epoch
    warmup_steps = max(1, round(total_steps * config.warmup_ratio))
    logs: list[StepLog] = []
    step = 0
    model.train()
    for epoch in range(config.epochs):
        perm_gen = torch.Generator().manual_seed(derive_seed(config.seed, "shuffle", epoch))
        order = torch.randperm(n, generator=perm_gen).tolist()
        for group_start in range(0, n, config.effective_batch):
            group = order[group_start : group_start + config.effective_batch]
            group_weight = sum(items[i].omega for i in group)
            lr = config.learning_rate * _lr_factor(step, total_steps, warmup_steps)
            for param_group in optimizer.param_groups:
                param_group["lr"] = lr
            optimizer.zero_grad()
            loss_value = 0.0
            chosen_reward = 0.0
            rejected_reward = 0.0
            for micro_start in range(0, len(group), config.micro_batch):
                for i in group[micro_start : micro_start + config.micro_batch]:
                    item = items[i]
                    ref_c, ref_r = refs[i]
                    pol_c = sequence_logprob_tensor(
                        model, item.chosen_ids, item.prompt_len, use_adapters=True)
                    pol_r = sequence_logprob_tensor(
                        model, item.rejected_ids, item.prompt_len, use_adapters=True)
                    loss, _ = dpo_loss(pol_c, ref_c, pol_r, ref_r, beta=config.beta)
                    # share of the whole accumulation group, so one update
                    # optimizes the group-level weighted objective
                    scale = (item.omega / group_weight if config.normalize_weights
                             else item.omega)
                    (scale * loss).backward()
                    with torch.no_grad():
                        loss_value += scale * float(loss)
                        share = item.omega / group_weight
                        chosen_reward += share * (float(pol_c) - ref_c)
                        rejected_reward += share * (float(pol_r) - ref_r)
            if not math.isfinite(loss_value):
                raise NonFiniteLoss(f"loss became {loss_value} at optimizer step {step}")
            optimizer.step()
            logs.append(StepLog(step=step, loss=loss_value,
                                mean_reward_margin=chosen_reward - rejected_reward,
                                chosen_reward=chosen_reward,
                                rejected_reward=rejected_reward, lr=lr))
            step += 1
    model.eval()
    out = checkpoint_from_model(
        model, rng_state_label=config.seed,
        metadata=_train_metadata(checkpoint, config, len(active), total_steps))
    return out, logs


def _train_metadata(parent: PolicyCheckpoint, config: TrainConfig,
                    n_pairs: int, total_steps: int) -> dict:
    return {
        "kind": "dpo-trained",
        "base": parent.metadata.get("kind", "init"),
        "train": {
            "beta": config.beta,
            "learning_rate": config.learning_rate,
            "warmup_ratio": config.warmup_ratio,
            "weight_decay": config.weight_decay,
            "micro_batch": config.micro_batch,
            "accumulation": config.accumulation,
            "epochs": config.epochs,
            "w_f": config.w_f,
            "w_b": config.w_b,
            "seed": config.seed,
            "normalize_weights": config.normalize_weights,
            "n_pairs": n_pairs,
            "total_steps": total_steps,
        },
    }


def batch_loss_value(model: TinyTransformer, pairs: Sequence[PreferencePair],
                     config: TrainConfig) -> float:
    """Weighted batch loss as a plain number, dropout disabled.

    This is the function a finite-difference check perturbs; it must be
    a deterministic function of the parameters.
    """
    items = _tokenize_pairs(pairs, config, model.config.context_len)
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            scored = []
            for item in items:
                pol_c = sequence_logprob_tensor(model, item.chosen_ids, item.prompt_len, True)
                pol_r = sequence_logprob_tensor(model, item.rejected_ids, item.prompt_len, True)
                ref_c = sequence_logprob_tensor(model, item.chosen_ids, item.prompt_len, False)
                ref_r = sequence_logprob_tensor(model, item.rejected_ids, item.prompt_len, False)
                scored.append((item.pair, (pol_c, ref_c, pol_r, ref_r)))
            loss = weighted_batch_loss(scored, beta=config.beta, w_f=config.w_f,
                                       w_b=config.w_b, normalize=config.normalize_weights)
    finally:
        model.train(was_training)
    return float(loss)


def adapter_gradients(model: TinyTransformer, pairs: Sequence[PreferencePair],
                      config: TrainConfig) -> dict[str, torch.Tensor]:
    """Analytic gradient of the weighted batch loss for every adapter tensor.

    Evaluated with dropout disabled so the result is a deterministic
    function of the parameters (directly comparable against finite
    differences of batch_loss_value).
    """
    items = _tokenize_pairs(pairs, config, model.config.context_len)
    refs = _reference_logprobs(model, items)
    was_training = model.training
    model.eval()
    try:
        scored = []
        for item, (ref_c, ref_r) in zip(items, refs):
            pol_c = sequence_logprob_tensor(model, item.chosen_ids, item.prompt_len, True)
            pol_r = sequence_logprob_tensor(model, item.rejected_ids, item.prompt_len, True)
            scored.append((item.pair, (pol_c, ref_c, pol_r, ref_r)))
        loss = weighted_batch_loss(scored, beta=config.beta, w_f=config.w_f,
                                   w_b=config.w_b, normalize=config.normalize_weights)
        params = model.adapter_parameters()
        grads = torch.autograd.grad(loss, [p for _, p in params], allow_unused=True)
    finally:
        model.train(was_training)
    out: dict[str, torch.Tensor] = {}
    for (name, param), grad in zip(params, grads):
        out[name] = torch.zeros_like(param) if grad is None else grad.detach().clone()
    return out
