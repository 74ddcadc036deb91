"""ECDSA P-256 / SHA-256 signatures in fixed-width r || s form.

Signing is deterministic (RFC 6979) so simulated transcripts and their
byte counts are reproducible under a fixed seed.
"""

from __future__ import annotations

from functools import lru_cache

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import (
    decode_dss_signature,
    encode_dss_signature,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

from .group import random_scalar

SIG_LEN = 64
_ALG = ec.ECDSA(hashes.SHA256(), deterministic_signing=True)
_VERIFY_ALG = ec.ECDSA(hashes.SHA256())


class SigningKey:
    __slots__ = ("_sk", "public_bytes")

    def __init__(self, secret: int):
        self._sk = ec.derive_private_key(secret, ec.SECP256R1())
        self.public_bytes = self._sk.public_key().public_bytes(
            encoding=Encoding.X962, format=PublicFormat.CompressedPoint
        )

    @classmethod
    def generate(cls, rng=None) -> "SigningKey":
        return cls(random_scalar(rng))

    def sign(self, msg: bytes) -> bytes:
        r, s = decode_dss_signature(self._sk.sign(msg, _ALG))
        return r.to_bytes(32, "big") + s.to_bytes(32, "big")

    def verify_key(self) -> "VerifyKey":
        return VerifyKey(self.public_bytes)


@lru_cache(maxsize=4096)
def _load_public(public_bytes: bytes):
    return ec.EllipticCurvePublicKey.from_encoded_point(ec.SECP256R1(), public_bytes)


@lru_cache(maxsize=1 << 15)
def _verify(public_bytes: bytes, msg: bytes, sig: bytes) -> bool:
    # memoized: in a simulation many parties check the same signed item
    if len(sig) != SIG_LEN:
        return False
    der = encode_dss_signature(int.from_bytes(sig[:32], "big"), int.from_bytes(sig[32:], "big"))
    try:
        _load_public(public_bytes).verify(der, msg, _VERIFY_ALG)
    except InvalidSignature:
        return False
    return True


class VerifyKey:
    __slots__ = ("public_bytes",)

    def __init__(self, public_bytes: bytes):
        self.public_bytes = bytes(public_bytes)
        _load_public(self.public_bytes)  # raises on an invalid encoding

    def verify(self, msg: bytes, sig: bytes) -> bool:
        return _verify(self.public_bytes, bytes(msg), bytes(sig))

