"""Non-interactive proof that log_g(g^s) = log_{c0}(c0^s).

Chaum-Pedersen with a Fiat-Shamir challenge:

    commit   A = g^beta, B = c0^beta
    e        = H(tag || g || c0 || g^s || c0^s || A || B) mod q
    z        = s*e + beta

and the verifier checks (g^s)^e * A = g^z and (c0^s)^e * B = c0^z.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

from ..crypto.group import GENERATOR, ORDER, Point, base_mul, random_scalar
from .wire import Reader, Writer

DLEQ_TAG = b"secagg/dleq/v1"


@dataclass(frozen=True)
class DleqProof:
    g_beta: Point  # g^beta
    c0_beta: Point  # c0^beta
    e: int
    z: int

    def to_bytes(self) -> bytes:
        return (
            Writer()
            .raw(self.g_beta.to_bytes())
            .raw(self.c0_beta.to_bytes())
            .raw(self.e.to_bytes(32, "big"))
            .raw(self.z.to_bytes(32, "big"))
            .getvalue()
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "DleqProof":
        r = Reader(data)
        a = Point.from_bytes(r.raw(33))
        b = Point.from_bytes(r.raw(33))
        e = int.from_bytes(r.raw(32), "big")
        z = int.from_bytes(r.raw(32), "big")
        r.done()
        return cls(a, b, e, z)


def challenge(c0: Point, g_s: Point, c0_s: Point, g_beta: Point, c0_beta: Point) -> int:
    h = hashlib.sha512(DLEQ_TAG)
    for p in (GENERATOR, c0, g_s, c0_s, g_beta, c0_beta):
        h.update(p.to_bytes())
    return int.from_bytes(h.digest(), "big") % ORDER


def dleq_prove(s_u: int, c0: Point, rng=None, c0_s: Point | None = None) -> DleqProof:
    """Prove that ``c0^s_u`` was formed with the exponent behind ``g^s_u``.

    ``c0_s`` may be passed when the partial decryption is already computed.
    """
    s_u %= ORDER
    g_s = base_mul(s_u)
    if c0_s is None:
        c0_s = c0 * s_u
    beta = random_scalar(rng)
    g_beta = base_mul(beta)
    c0_beta = c0 * beta
    e = challenge(c0, g_s, c0_s, g_beta, c0_beta)
    return DleqProof(g_beta, c0_beta, e, (s_u * e + beta) % ORDER)


def dleq_verify(proof: DleqProof, c0: Point, c0_s: Point, g_s: Point) -> bool:
    if not (0 <= proof.e < ORDER and 0 <= proof.z < ORDER):
        return False
    if proof.e != challenge(c0, g_s, c0_s, proof.g_beta, proof.c0_beta):
        return False
    if g_s * proof.e + proof.g_beta != base_mul(proof.z):
        return False
    return c0_s * proof.e + proof.c0_beta == c0 * proof.z
