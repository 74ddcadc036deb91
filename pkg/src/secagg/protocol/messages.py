"""Collection-round messages and their canonical byte layouts.

Layouts (all integers big-endian, ``blob`` = u32 length || bytes):

SignedCiphertext (146 bytes)
    client u32 | peer u32 | t u64 | c0 (33) | c1 (33) | sig (64)
    peer = 0 marks the ciphertext of the individual mask (robust mode).

MaskedVector
    "MV" | client u32 | t u64 | blob(vec, little-endian u32 words)
    | u32 count | count * blob(AEAD share ciphertext)      (decryptor order)
    | u32 count | count * SignedCiphertext                 (neighbour order)
    | u8 has_mask | [SignedCiphertext]

DecryptionRequest
    "RQ" | server u32 | t u64 | u32 count | count * (client u32 | label u8)

Attachment
    client u32 | blob(share ciphertext, empty if none)
    | u32 count | count * SignedCiphertext

RequestBundle
    blob(DecryptionRequest) | u32 count | count * blob(Attachment)

SignedRequest
    "SR" | decryptor u32 | blob(DecryptionRequest) | sig (64)

DecryptorResponse
    "DR" | decryptor u32 | t u64
    | u32 count | count * (client u32 | share (32))
    | u32 count | count * (client u32 | peer u32 | c0^s (33) | u8 has_proof | [proof (130)])
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ..crypto.elgamal import Ciphertext
from ..crypto.group import Point
from ..crypto.prg import round_tag
from ..crypto.signing import SIG_LEN
from .dleq import DleqProof
from .wire import Reader, WireError, Writer

ONLINE = 1
OFFLINE = 0

PAIR_DOMAIN = b"secagg/pair-ct"
REQ_DOMAIN = b"secagg/req"
SIGNED_CT_LEN = 4 + 4 + 8 + 66 + SIG_LEN
_PROOF_LEN = 33 + 33 + 32 + 32


@dataclass(frozen=True)
class SignedCiphertext:
    """ElGamal ciphertext of h_{i,j,t} (or of m_{i,t} when peer == 0), signed by i."""

    client: int
    peer: int
    t: int
    ct: Ciphertext
    sig: bytes

    @staticmethod
    def signed_bytes_for(client: int, peer: int, t: int, ct: Ciphertext) -> bytes:
        return PAIR_DOMAIN + client.to_bytes(4, "big") + peer.to_bytes(4, "big") + round_tag(t) + ct.to_bytes()

    def signed_bytes(self) -> bytes:
        return self.signed_bytes_for(self.client, self.peer, self.t, self.ct)

    def to_bytes(self) -> bytes:
        return (
            Writer().u32(self.client).u32(self.peer).u64(self.t).raw(self.ct.to_bytes()).raw(self.sig).getvalue()
        )

    def wire_size(self) -> int:
        return SIGNED_CT_LEN

    @classmethod
    def read(cls, r: Reader) -> "SignedCiphertext":
        client, peer, t = r.u32(), r.u32(), r.u64()
        ct = Ciphertext.from_bytes(r.raw(66))
        return cls(client, peer, t, ct, r.raw(SIG_LEN))

    @classmethod
    def from_bytes(cls, data: bytes) -> "SignedCiphertext":
        r = Reader(data)
        out = cls.read(r)
        r.done()
        return out


@dataclass(frozen=True)
class MaskedVector:
    client: int
    t: int
    vec: np.ndarray = field(repr=False)  # uint32, length d
    shares: tuple[bytes, ...] = ()  # one AEAD ciphertext per decryptor
    pairs: tuple[SignedCiphertext, ...] = ()  # one per neighbour
    mask: SignedCiphertext | None = None  # robust mode only

    def to_bytes(self) -> bytes:
        w = Writer().raw(b"MV").u32(self.client).u64(self.t)
        w.blob(np.asarray(self.vec, dtype="<u4").tobytes())
        w.u32(len(self.shares))
        for s in self.shares:
            w.blob(s)
        w.u32(len(self.pairs))
        for p in self.pairs:
            w.raw(p.to_bytes())
        w.u8(self.mask is not None)
        if self.mask is not None:
            w.raw(self.mask.to_bytes())
        return w.getvalue()

    def wire_size(self) -> int:
        """len(to_bytes()) without encoding."""
        n = 2 + 4 + 8 + 4 + 4 * len(self.vec)
        n += 4 + sum(4 + len(s) for s in self.shares)
        n += 4 + SIGNED_CT_LEN * len(self.pairs) + 1
        return n + (SIGNED_CT_LEN if self.mask is not None else 0)

    @classmethod
    def from_bytes(cls, data: bytes) -> "MaskedVector":
        r = Reader(data)
        if r.raw(2) != b"MV":
            raise WireError("not a MaskedVector")
        client, t = r.u32(), r.u64()
        raw = r.blob()
        if len(raw) % 4:
            raise WireError("vector length not a multiple of 4")
        vec = np.frombuffer(raw, dtype="<u4").astype(np.uint32)
        shares = tuple(r.blob() for _ in range(r.u32()))
        pairs = tuple(SignedCiphertext.read(r) for _ in range(r.u32()))
        mask = SignedCiphertext.read(r) if r.u8() else None
        r.done()
        return cls(client, t, vec, shares, pairs, mask)


@dataclass(frozen=True)
class DecryptionRequest:
    """The server's online/offline labelling of S_t.

    ``labels`` is a sequence rather than a mapping so that a malformed
    request (a client labelled twice) is representable and can be rejected.
    """

    t: int
    labels: tuple[tuple[int, int], ...]
    server: int = 0

    @classmethod
    def build(cls, t: int, members, online, server: int = 0) -> "DecryptionRequest":
        online = set(online)
        return cls(t, tuple((i, ONLINE if i in online else OFFLINE) for i in sorted(members)), server)

    def online(self) -> frozenset:
        return frozenset(i for i, lab in self.labels if lab == ONLINE)

    def offline(self) -> frozenset:
        return frozenset(i for i, lab in self.labels if lab != ONLINE)

    def to_bytes(self) -> bytes:
        return self._encoded

    @cached_property
    def _encoded(self) -> bytes:
        w = Writer().raw(b"RQ").u32(self.server).u64(self.t).u32(len(self.labels))
        for i, lab in self.labels:
            w.u32(i).u8(lab)
        return w.getvalue()

    def wire_size(self) -> int:
        return 2 + 4 + 8 + 4 + 5 * len(self.labels)

    @classmethod
    def from_bytes(cls, data: bytes) -> "DecryptionRequest":
        r = Reader(data)
        if r.raw(2) != b"RQ":
            raise WireError("not a DecryptionRequest")
        server, t = r.u32(), r.u64()
        labels = tuple((r.u32(), r.u8()) for _ in range(r.u32()))
        r.done()
        return cls(t, labels, server)

    def signed_bytes(self) -> bytes:
        # req || t; the round is also inside the encoding
        return REQ_DOMAIN + self.to_bytes() + round_tag(self.t)

    def digest(self) -> bytes:
        return self._digest

    @cached_property
    def _digest(self) -> bytes:
        return hashlib.sha256(self._encoded).digest()


@dataclass(frozen=True)
class Attachment:
    """E_i as seen by one decryptor: its share ciphertext or ElGamal ciphertexts."""

    client: int
    share: bytes = b""
    ciphertexts: tuple[SignedCiphertext, ...] = ()

    def to_bytes(self) -> bytes:
        w = Writer().u32(self.client).blob(self.share).u32(len(self.ciphertexts))
        for c in self.ciphertexts:
            w.raw(c.to_bytes())
        return w.getvalue()

    def wire_size(self) -> int:
        return 4 + 4 + len(self.share) + 4 + SIGNED_CT_LEN * len(self.ciphertexts)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Attachment":
        r = Reader(data)
        client = r.u32()
        share = r.blob()
        cts = tuple(SignedCiphertext.read(r) for _ in range(r.u32()))
        r.done()
        return cls(client, share, cts)


@dataclass(frozen=True)
class RequestBundle:
    """What the server sends one decryptor: req plus that decryptor's attachments."""

    request: DecryptionRequest
    attachments: tuple[Attachment, ...]

    def by_client(self) -> dict[int, Attachment]:
        out: dict[int, Attachment] = {}
        for a in self.attachments:
            out.setdefault(a.client, a)  # first one wins
        return out

    def to_bytes(self) -> bytes:
        w = Writer().blob(self.request.to_bytes()).u32(len(self.attachments))
        for a in self.attachments:
            w.blob(a.to_bytes())
        return w.getvalue()

    def wire_size(self) -> int:
        return 4 + self.request.wire_size() + 4 + sum(4 + a.wire_size() for a in self.attachments)

    @classmethod
    def from_bytes(cls, data: bytes) -> "RequestBundle":
        r = Reader(data)
        req = DecryptionRequest.from_bytes(r.blob())
        atts = tuple(Attachment.from_bytes(r.blob()) for _ in range(r.u32()))
        r.done()
        return cls(req, atts)


@dataclass(frozen=True)
class SignedRequest:
    decryptor: int
    request: DecryptionRequest
    sig: bytes

    def to_bytes(self) -> bytes:
        return Writer().raw(b"SR").u32(self.decryptor).blob(self.request.to_bytes()).raw(self.sig).getvalue()

    def wire_size(self) -> int:
        return 2 + 4 + 4 + self.request.wire_size() + len(self.sig)

    @classmethod
    def from_bytes(cls, data: bytes) -> "SignedRequest":
        r = Reader(data)
        if r.raw(2) != b"SR":
            raise WireError("not a SignedRequest")
        dec = r.u32()
        req = DecryptionRequest.from_bytes(r.blob())
        sig = r.raw(SIG_LEN)
        r.done()
        return cls(dec, req, sig)


@dataclass
class DecryptorResponse:
    decryptor: int
    t: int
    shares: dict[int, int] = field(default_factory=dict)  # client -> m_{i,u,t}
    partials: dict[tuple[int, int], Point] = field(default_factory=dict)  # (client, peer) -> c0^{s_u}
    proofs: dict[tuple[int, int], DleqProof] = field(default_factory=dict)

    def to_bytes(self) -> bytes:
        w = Writer().raw(b"DR").u32(self.decryptor).u64(self.t).u32(len(self.shares))
        for i in sorted(self.shares):
            w.u32(i).raw(self.shares[i].to_bytes(32, "big"))
        w.u32(len(self.partials))
        for key in sorted(self.partials):
            w.u32(key[0]).u32(key[1]).raw(self.partials[key].to_bytes())
            proof = self.proofs.get(key)
            w.u8(proof is not None)
            if proof is not None:
                w.raw(proof.to_bytes())
        return w.getvalue()

    def wire_size(self) -> int:
        n = 2 + 4 + 8 + 4 + 36 * len(self.shares) + 4 + 42 * len(self.partials)
        return n + _PROOF_LEN * sum(1 for k in self.partials if k in self.proofs)

    @classmethod
    def from_bytes(cls, data: bytes) -> "DecryptorResponse":
        r = Reader(data)
        if r.raw(2) != b"DR":
            raise WireError("not a DecryptorResponse")
        out = cls(r.u32(), r.u64())
        for _ in range(r.u32()):
            i = r.u32()
            out.shares[i] = int.from_bytes(r.raw(32), "big")
        for _ in range(r.u32()):
            key = (r.u32(), r.u32())
            out.partials[key] = Point.from_bytes(r.raw(33))
            if r.u8():
                out.proofs[key] = DleqProof.from_bytes(r.raw(_PROOF_LEN))
        r.done()
        return out

