"""Versioned binary checkpoint format with bit-exact round trips.

Layout: an 8-byte little-endian header length, a UTF-8 JSON header
(format version, model config, seed label, free-form metadata, a
sha256 checksum of the data region, and a tensor manifest sorted by
name with shapes, byte offsets, and base/adapter grouping), then the
raw little-endian float32 tensor data in manifest order.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from ..errors import FbdpoError
from .model import ModelConfig, TinyTransformer, build_model

FORMAT_VERSION = 1


class IoError(FbdpoError):
    """Checkpoint file could not be read or written."""


class ChecksumMismatch(FbdpoError):
    """Stored checksum does not match the tensor data on disk."""


class VersionMismatch(FbdpoError):
    """Checkpoint was written by an incompatible format version."""


@dataclass
class PolicyCheckpoint:
    config: ModelConfig
    base_tensors: dict[str, torch.Tensor]
    adapter_tensors: dict[str, torch.Tensor]
    rng_state_label: int
    metadata: dict = field(default_factory=dict)

    def all_tensors(self) -> dict[str, torch.Tensor]:
        merged = dict(self.base_tensors)
        merged.update(self.adapter_tensors)
        return merged

    def build(self) -> TinyTransformer:
        """Materialize a model carrying these weights."""
        model = build_model(self.config, seed=0)
        state = {name: tensor.to(torch.float32) for name, tensor in self.all_tensors().items()}
        model.load_state_dict(state)
        for name, param in model.named_parameters():
            param.requires_grad_("lora_" in name)
        return model


def checkpoint_from_model(model: TinyTransformer, rng_state_label: int,
                          metadata: dict | None = None) -> PolicyCheckpoint:
    base: dict[str, torch.Tensor] = {}
    adapter: dict[str, torch.Tensor] = {}
    for name, param in model.state_dict().items():
        bucket = adapter if "lora_" in name else base
        bucket[name] = param.detach().to(torch.float32).clone()
    return PolicyCheckpoint(config=model.config, base_tensors=base,
                            adapter_tensors=adapter, rng_state_label=rng_state_label,
                            metadata=dict(metadata or {}))


def init_checkpoint(config: ModelConfig, seed: int) -> PolicyCheckpoint:
    """Freshly initialized checkpoint (adapter deltas exactly zero)."""
    return checkpoint_from_model(build_model(config, seed=seed), rng_state_label=seed)


def save_checkpoint(checkpoint: PolicyCheckpoint, path: str | Path) -> None:
    tensors = checkpoint.all_tensors()
    manifest = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        array = tensors[name].detach().cpu().to(torch.float32).numpy()
        blob = np.ascontiguousarray(array, dtype="<f4").tobytes()
        manifest.append({
            "name": name,
            "shape": list(array.shape),
            "offset": offset,
            "group": "adapter" if name in checkpoint.adapter_tensors else "base",
        })
        blobs.append(blob)
        offset += len(blob)
    data = b"".join(blobs)
    header = {
        "version": FORMAT_VERSION,
        "config": checkpoint.config.to_dict(),
        "rng_state_label": checkpoint.rng_state_label,
        "metadata": checkpoint.metadata,
        "checksum": hashlib.sha256(data).hexdigest(),
        "manifest": manifest,
    }
    header_bytes = json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8")
    try:
        with Path(path).open("wb") as handle:
            handle.write(struct.pack("<Q", len(header_bytes)))
            handle.write(header_bytes)
            handle.write(data)
    except OSError as exc:
        raise IoError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path: str | Path) -> PolicyCheckpoint:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read checkpoint {path}: {exc}") from exc
    if len(raw) < 8:
        raise IoError(f"checkpoint {path} too short for a header length")
    (header_len,) = struct.unpack("<Q", raw[:8])
    header_end = 8 + header_len
    if len(raw) < header_end:
        raise IoError(f"checkpoint {path} truncated inside the header")
    try:
        header = json.loads(raw[8:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise IoError(f"checkpoint {path} header unreadable: {exc}") from exc
    version = header.get("version")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"checkpoint format {version}, reader supports {FORMAT_VERSION}")
    data = raw[header_end:]
    if hashlib.sha256(data).hexdigest() != header["checksum"]:
        raise ChecksumMismatch(f"checkpoint {path} data does not match its checksum")
    config = ModelConfig.from_dict(header["config"])
    base: dict[str, torch.Tensor] = {}
    adapter: dict[str, torch.Tensor] = {}
    for entry in header["manifest"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        array = np.frombuffer(data, dtype="<f4", count=count, offset=start).reshape(shape)
        tensor = torch.from_numpy(array.copy())
        bucket = adapter if entry["group"] == "adapter" else base
        bucket[entry["name"]] = tensor
    return PolicyCheckpoint(config=config, base_tensors=base, adapter_tensors=adapter,
                            rng_state_label=header["rng_state_label"],
                            metadata=header.get("metadata", {}))
