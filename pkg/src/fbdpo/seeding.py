"""Deterministic seed derivation for independent sampling streams.

Each (purpose, problem, attempt) tuple gets its own child seed so that
partial reruns and parallel scheduling reproduce identical draws.
"""

from __future__ import annotations

import hashlib

_MASK = (1 << 63) - 1  # keep seeds in the nonneg int64 range torch accepts


def derive_seed(base_seed: int, *parts: object) -> int:
    """Mix a base seed with context parts into a stable child seed."""
    tag = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    mixed = int.from_bytes(digest[:8], "little") ^ base_seed
    return mixed & _MASK
