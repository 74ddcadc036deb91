"""ElGamal over P-256 with threshold (partial) decryption.

Encryption of a group element h under PK is (g^w, h * PK^w) in
multiplicative notation; this module uses the additive curve operations,
so the second component is h + w*PK.  A decryptor holding a Shamir share
s_u of SK answers with c0^{s_u}; any threshold + 1 of those combine into
c0^{SK} through Lagrange coefficients in the exponent.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .group import ORDER, FixedBase, Point, base_mul, multi_mul, random_scalar
from .shamir import InsufficientShares, lagrange_coefficients


class DegenerateValue(ValueError):
    """SK = 0, randomness w = 0 or an identity plaintext/key."""


@dataclass(frozen=True)
class Ciphertext:
    c0: Point
    c1: Point

    def to_bytes(self) -> bytes:
        return self.c0.to_bytes() + self.c1.to_bytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Ciphertext":
        if len(data) != 66:
            raise ValueError("ciphertext encoding is 66 bytes")
        return cls(Point.from_bytes(data[:33]), Point.from_bytes(data[33:]))


def public_key(sk: int) -> Point:
    if sk % ORDER == 0:
        raise DegenerateValue("secret key 0 is not allowed")
    return base_mul(sk)


def keygen(rng=None) -> tuple[int, Point]:
    sk = random_scalar(rng)
    return sk, public_key(sk)


def encrypt(pk: Point | FixedBase, h: Point, rng=None, randomness: int | None = None) -> Ciphertext:
    """(g^w, h * PK^w).  Pass a ``FixedBase`` for PK when encrypting many times."""
    if isinstance(pk, Point) and pk.is_identity:
        raise DegenerateValue("identity public key")
    if h.is_identity:
        raise DegenerateValue("identity plaintext")
    w = random_scalar(rng) if randomness is None else randomness % ORDER
    if w == 0:
        raise DegenerateValue("encryption randomness 0 is not allowed")
    if isinstance(pk, FixedBase):
        return Ciphertext(*pk.encrypt_pair(w, h))
    return Ciphertext(base_mul(w), h + pk * w)


def decrypt(sk: int, ct: Ciphertext) -> Point:
    if sk % ORDER == 0:
        raise DegenerateValue("secret key 0 is not allowed")
    return ct.c1 - ct.c0 * sk


def partial_decrypt(share_value: int, c0: Point) -> Point:
    """c0^{s_u} for one decryptor."""
    return c0 * share_value


def combine_with(partials: Mapping[int, Point], beta: Mapping[int, int]) -> Point:
    """prod_u (c0^{s_u})^{beta_u} for precomputed coefficients."""
    return multi_mul((beta[u], partials[u]) for u in beta)


def threshold_combine(partials: Mapping[int, Point], threshold: int) -> Point:
    """Recover c0^{SK} from partial decryptions keyed by Shamir index.

    Exactly ``threshold + 1`` partials are used (the smallest indices), so
    extra partials never change the result.
    """
    if len(partials) < threshold + 1:
        raise InsufficientShares(f"need {threshold + 1} partials, got {len(partials)}")
    chosen = sorted(partials)[: threshold + 1]
    beta = lagrange_coefficients(chosen)
    return combine_with(partials, beta)


def unblind(ct: Ciphertext, c0_sk: Point) -> Point:
    """The plaintext c1 / c0^{SK}."""
    return ct.c1 - c0_sk

