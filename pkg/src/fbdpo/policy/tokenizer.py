"""Byte-level tokenizer with BOS/EOS/PAD specials.

Token ids 0..255 are raw byte values; BOS=256, EOS=257, PAD=258.
Decoding strips special tokens, so detokenize(tokenize(s)) == s for any
UTF-8 string.
"""

from __future__ import annotations

from ..errors import FbdpoError

BOS = 256
EOS = 257
PAD = 258
VOCAB_SIZE = 259


class InvalidTokenId(FbdpoError):
    """A token id falls outside the vocabulary."""


class ByteTokenizer:
    bos = BOS
    eos = EOS
    pad = PAD
    vocab_size = VOCAB_SIZE

    def encode_prompt(self, text: str) -> list[int]:
        """Prompt encoding: BOS followed by the raw bytes."""
        return [BOS, *text.encode("utf-8")]

    def encode_completion(self, text: str) -> list[int]:
        """Completion encoding: raw bytes followed by EOS."""
        return [*text.encode("utf-8"), EOS]

    def decode(self, ids: list[int]) -> str:
        """Decode ids back to text, dropping special tokens."""
        data = bytearray()
        for token in ids:
            if not 0 <= token < VOCAB_SIZE:
                raise InvalidTokenId(f"token id {token} outside vocabulary of {VOCAB_SIZE}")
            if token < 256:
                data.append(token)
        return data.decode("utf-8", errors="replace")
