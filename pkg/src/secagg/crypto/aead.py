"""AES-GCM with an embedded round tag.

The sealed plaintext is ``payload || t`` (t as 8-byte big-endian), matching
the way shares are tagged with the round they belong to.  ``open_sealed``
separates a forged ciphertext (``AuthenticationError``) from an authentic
one that belongs to another round (``RoundMismatch``).
"""

from __future__ import annotations

import os

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .prg import round_tag

NONCE_LEN = 12
TAG_LEN = 16
OVERHEAD = NONCE_LEN + 8 + TAG_LEN


class AuthenticationError(ValueError):
    pass


class RoundMismatch(ValueError):
    def __init__(self, expected: int, found: int):
        super().__init__(f"ciphertext is for round {found}, expected {expected}")
        self.expected = expected
        self.found = found


def seal(key: bytes, payload: bytes, t: int, rng=None) -> bytes:
    nonce = rng.getrandbits(96).to_bytes(NONCE_LEN, "big") if rng is not None else os.urandom(NONCE_LEN)
    return nonce + AESGCM(key).encrypt(nonce, payload + round_tag(t), None)


def open_sealed(key: bytes, blob: bytes, t: int) -> bytes:
    if len(blob) < OVERHEAD:
        raise AuthenticationError("ciphertext too short")
    try:
        pt = AESGCM(key).decrypt(blob[:NONCE_LEN], blob[NONCE_LEN:], None)
    except InvalidTag:
        raise AuthenticationError("authentication failed") from None
    found = int.from_bytes(pt[-8:], "big")
    if found != t:
        raise RoundMismatch(t, found)
    return pt[:-8]
