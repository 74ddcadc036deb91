"""Long-term client keys and the public-key directory.

Every client holds three key types: a DH secret a_i (pairwise mask seeds
with other clients), an encryption secret b_i (symmetric channel keys
k_{i,j} with decryptors) and a signing key.  The public halves live in a
``Directory`` which stands in for the PKI.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .group import Point, base_mul, random_scalar
from .hash_to_curve import group_to_seed
from .signing import SigningKey, VerifyKey


@dataclass(frozen=True)
class PublicKeys:
    client: int
    dh: Point  # g^{a_i}
    enc: Point  # g^{b_i}
    verify: VerifyKey

    def to_bytes(self) -> bytes:
        return (
            self.client.to_bytes(4, "big")
            + self.dh.to_bytes()
            + self.enc.to_bytes()
            + self.verify.public_bytes
        )


@dataclass
class ClientKeys:
    client: int
    dh_secret: int
    enc_secret: int
    signer: SigningKey
    public: PublicKeys
    # memo tables keyed by the unordered id pair; the derivations are
    # deterministic so caching is safe (see share_memos)
    _pair: dict = field(default_factory=dict, repr=False)
    _chan: dict = field(default_factory=dict, repr=False)

    @classmethod
    def generate(cls, client: int, rng=None) -> "ClientKeys":
        a = random_scalar(rng)
        b = random_scalar(rng)
        signer = SigningKey.generate(rng)
        pub = PublicKeys(client, base_mul(a), base_mul(b), signer.verify_key())
        return cls(client, a, b, signer, pub)

    def pairwise_seed(self, peer: PublicKeys) -> bytes:
        """r_{i,j}: the hashed DH value (g^{a_j})^{a_i}, lambda bits."""
        key = _unordered(self.client, peer.client)
        seed = self._pair.get(key)
        if seed is None:
            seed = self._pair[key] = group_to_seed(peer.dh * self.dh_secret)
        return seed

    def channel_key(self, peer: PublicKeys) -> bytes:
        """k_{i,j}: AES-128 key from (g^{b_j})^{b_i}."""
        pair = _unordered(self.client, peer.client)
        key = self._chan.get(pair)
        if key is None:
            shared = (peer.enc * self.enc_secret).to_bytes()
            key = self._chan[pair] = hashlib.sha256(b"secagg/channel" + shared).digest()[:16]
        return key

    def sign(self, msg: bytes) -> bytes:
        return self.signer.sign(msg)


def _unordered(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def share_memos(keys) -> None:
    """Let a set of key holders share their memo tables.

    Only for a simulator that holds every party's keys: both endpoints of a
    Diffie-Hellman pair derive the same value, so computing it once instead
    of twice changes nothing observable.
    """
    pair: dict = {}
    chan: dict = {}
    for k in keys:
        k._pair = pair
        k._chan = chan


class Directory:
    """The PKI oracle: client id -> public keys."""

    def __init__(self, entries=()):
        self._by_id: dict[int, PublicKeys] = {}
        for pub in entries:
            self.register(pub)

    def register(self, pub: PublicKeys) -> None:
        if pub.client in self._by_id:
            raise ValueError(f"client {pub.client} already registered")
        self._by_id[pub.client] = pub

    def __getitem__(self, client: int) -> PublicKeys:
        return self._by_id[client]

    def __contains__(self, client: int) -> bool:
        return client in self._by_id

    def __len__(self) -> int:
        return len(self._by_id)

    def verify(self, client: int, msg: bytes, sig: bytes) -> bool:
        pub = self._by_id.get(client)
        return pub is not None and pub.verify.verify(msg, sig)
