"""Modulo-256 additive stream cipher over latent bytes.

The keystream for message ``stream_index`` is the SHAKE-256 output of
``domain || seed || stream_index``; distinct indices yield independent
streams, so each transmitted image gets its own, never reused.
"""

from __future__ import annotations

import hashlib
import secrets
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SEED_BYTES = 32
_DOMAIN = b"srec/keystream/v1"


class WeakKeyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class KeySeed:
    raw: bytes

    def __post_init__(self):
        if len(self.raw) != SEED_BYTES:
            raise ValueError(f"key seed must be exactly {SEED_BYTES} bytes, got {len(self.raw)}")
        if not any(self.raw):
            warnings.warn("all-zero key seed", WeakKeyWarning, stacklevel=3)

    @classmethod
    def generate(cls) -> KeySeed:
        return cls(secrets.token_bytes(SEED_BYTES))

    @classmethod
    def from_hex(cls, text: str) -> KeySeed:
        text = text.strip()
        if len(text) != 2 * SEED_BYTES:
            raise ValueError(f"expected {2 * SEED_BYTES} hex characters, got {len(text)}")
        return cls(bytes.fromhex(text))

    @classmethod
    def from_int(cls, value: int) -> KeySeed:
        """Deterministic seed for simulations (not for real secrecy)."""
        digest = hashlib.sha256(b"srec/seed-from-int" + value.to_bytes(16, "little", signed=True))
        return cls(digest.digest())

    def hex(self) -> str:
        return self.raw.hex()

    def save(self, path) -> None:
        Path(path).write_text(self.hex() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> KeySeed:
        return cls.from_hex(Path(path).read_text(encoding="utf-8"))


def derive_keystream(seed: KeySeed, length: int, stream_index: int = 0) -> np.ndarray:
    if length < 0:
        raise ValueError("length must be non-negative")
    if stream_index < 0:
        raise ValueError("stream_index must be non-negative")
    xof = hashlib.shake_256(_DOMAIN + seed.raw + stream_index.to_bytes(16, "little"))
    return np.frombuffer(xof.digest(length), dtype=np.uint8).copy() if length else np.zeros(0, np.uint8)


def _check(data: np.ndarray, key: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    data = np.asarray(data, dtype=np.uint8)
    key = np.asarray(key, dtype=np.uint8)
    if data.shape != key.shape:
        raise ValueError(f"length mismatch: message {data.shape} vs key {key.shape}")
    return data, key


def encrypt_bytes(plaintext: np.ndarray, key: np.ndarray) -> np.ndarray:
    """``c[i] = (p[i] + k[i]) mod 256``."""
    p, k = _check(plaintext, key)
    return p + k  # uint8 arithmetic wraps modulo 256


def decrypt_bytes(ciphertext: np.ndarray, key: np.ndarray) -> np.ndarray:
    """``p[i] = (c[i] - k[i]) mod 256``."""
    c, k = _check(ciphertext, key)
    return c - k
