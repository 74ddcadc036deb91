"""Regular-client role: the single report message of a round.

Vec_{i,t} = x_{i,t} + PRG(m_{i,t}) + sum_{j in A_t(i)} sign(i, j) * PRG(h_{i,j,t})

with sign(i, j) = +1 for i < j and -1 otherwise, all mod 2^32.  The
pairwise seed pipeline is

    r_{i,j}   = group_to_seed((g^{a_j})^{a_i})
    P_{i,j,t} = encode_to_group(PRF(r_{i,j}, t))
    h_{i,j,t} = group_to_seed(P_{i,j,t})

so the ElGamal ciphertext of P lets the server re-derive h after threshold
decryption.  A model hash, when given, is folded into every PRG seed (not
into h itself), so a server that lies about the model cannot unmask.
"""

from __future__ import annotations

import secrets
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..crypto.aead import seal
from ..crypto.elgamal import encrypt
from ..crypto.group import FixedBase, Point, base_mul, random_scalar
from ..crypto.hash_to_curve import encode_to_group, group_to_seed
from ..crypto.keys import ClientKeys, Directory, PublicKeys
from ..crypto.prg import LAMBDA_BYTES, prf, prg, round_tag, seed_with_model
from ..crypto.shamir import share
from ..graph import RoundContext, choose_set, find_neighbors
from .messages import MaskedVector, SignedCiphertext

MASK_PEER = 0  # peer id marking the individual-mask ciphertext


def pair_sign(i: int, j: int) -> int:
    return 1 if i < j else -1


def pair_point(keys: ClientKeys, peer: PublicKeys, t: int) -> Point:
    """P_{i,j,t}; both endpoints derive the same point."""
    return encode_to_group(prf(keys.pairwise_seed(peer), round_tag(t)))


def apply_mask(acc: np.ndarray, seed: bytes, sign: int = 1) -> None:
    """acc += sign * PRG(seed), in place, mod 2^32."""
    stream = prg(seed, acc.shape[0])
    if sign > 0:
        acc += stream
    else:
        acc -= stream


def individual_seed(m: bytes | Point, model_hash: bytes | None = None) -> bytes:
    """PRG seed of the individual mask (m is a point in robust mode)."""
    raw = group_to_seed(m) if isinstance(m, Point) else m
    return seed_with_model(raw, model_hash)


@dataclass
class ReportSecrets:
    """Ground truth kept by the client; the simulator's audit compares against it."""

    client: int
    t: int
    m: bytes | Point
    pair_seeds: dict[int, bytes] = field(default_factory=dict)  # j -> h_{i,j,t}
    neighbors: frozenset = frozenset()
    m_shares: dict[int, int] = field(default_factory=dict)  # decryptor -> Shamir share of m


def build_report(
    keys: ClientKeys,
    ctx: RoundContext,
    x,
    pk: Point | FixedBase,
    decryptors: Sequence[int],
    directory: Directory,
    ell: int | None = None,
    model_hash: bytes | None = None,
    rng=None,
    robust: bool = False,
    d: int | None = None,
) -> tuple[MaskedVector, ReportSecrets] | None:
    """The report message plus the secrets behind it; None when i is not in S_t."""
    i = keys.client
    members = choose_set(ctx.v, ctx.t, ctx.n_t, ctx.N)
    if i not in members:
        return None
    x = np.asarray(x)
    if d is not None and x.shape != (d,):
        raise ValueError(f"input must have length {d}, got {x.shape}")
    if x.ndim != 1:
        raise ValueError("input must be a vector")
    t = ctx.t
    dec = tuple(sorted(decryptors))
    L = len(dec)
    ell = (L - 1) // 3 if ell is None else ell
    neighbors = find_neighbors(ctx.v, members, i, ctx.rho)
    acc = x.astype(np.uint32, copy=True)

    shares_out: tuple[bytes, ...] = ()
    mask_ct = None
    if robust:
        m: bytes | Point = base_mul(random_scalar(rng))
        ct = encrypt(pk, m, rng)
        sig = keys.sign(SignedCiphertext.signed_bytes_for(i, MASK_PEER, t, ct))
        mask_ct = SignedCiphertext(i, MASK_PEER, t, ct, sig)
    else:
        m = rng.randbytes(LAMBDA_BYTES) if rng is not None else secrets.token_bytes(LAMBDA_BYTES)
        pieces = share(int.from_bytes(m, "big"), ell, L, rng)
        shares_out = tuple(
            seal(keys.channel_key(directory[u]), s.value.to_bytes(32, "big"), t, rng) for u, s in zip(dec, pieces)
        )
    apply_mask(acc, individual_seed(m, model_hash))

    secrets_out = ReportSecrets(i, t, m, neighbors=neighbors)
    if not robust:
        secrets_out.m_shares = {u: s.value for u, s in zip(dec, pieces)}
    pairs = []
    for j in sorted(neighbors):
        point = pair_point(keys, directory[j], t)
        h = group_to_seed(point)
        secrets_out.pair_seeds[j] = h
        apply_mask(acc, seed_with_model(h, model_hash), pair_sign(i, j))
        ct = encrypt(pk, point, rng)
        sig = keys.sign(SignedCiphertext.signed_bytes_for(i, j, t, ct))
        pairs.append(SignedCiphertext(i, j, t, ct, sig))
    return MaskedVector(i, t, acc, shares_out, tuple(pairs), mask_ct), secrets_out


def client_report(
    keys: ClientKeys,
    ctx: RoundContext,
    x,
    pk: Point | FixedBase,
    decryptors: Sequence[int],
    directory: Directory,
    ell: int | None = None,
    model_hash: bytes | None = None,
    rng=None,
    robust: bool = False,
    d: int | None = None,
) -> MaskedVector | None:
    """Vec_{i,t} with its attached ciphertexts, or None if i sits this round out."""
    out = build_report(keys, ctx, x, pk, decryptors, directory, ell, model_hash, rng, robust, d)
    return None if out is None else out[0]
