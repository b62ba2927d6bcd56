"""Desk-scale policy model: tokenizer, transformer, sampling, checkpoints."""

from .checkpoint import (
    ChecksumMismatch,
    IoError,
    PolicyCheckpoint,
    VersionMismatch,
    checkpoint_from_model,
    init_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from .model import (
    LoRALinear,
    ModelConfig,
    TinyTransformer,
    build_model,
    init_weights,
    sequence_logprob,
    sequence_logprob_tensor,
)
from .pretrain import pretrain_base
from .sampling import sample, sample_token, sample_tokens
from .tokenizer import BOS, EOS, PAD, VOCAB_SIZE, ByteTokenizer, InvalidTokenId

__all__ = [
    "BOS",
    "EOS",
    "PAD",
    "VOCAB_SIZE",
    "ByteTokenizer",
    "ChecksumMismatch",
    "InvalidTokenId",
    "IoError",
    "LoRALinear",
    "ModelConfig",
    "PolicyCheckpoint",
    "TinyTransformer",
    "VersionMismatch",
    "build_model",
    "checkpoint_from_model",
    "init_checkpoint",
    "init_weights",
    "load_checkpoint",
    "pretrain_base",
    "sample",
    "sample_token",
    "sample_tokens",
    "sequence_logprob",
    "sequence_logprob_tensor",
    "save_checkpoint",
]
