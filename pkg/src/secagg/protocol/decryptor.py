"""Decryptor role: sign the server's request, cross-check it, reconstruct.

A decryptor signs req || t and the server relays the signed copy to the
other decryptors.  It accepts a request only when at least 2*ell + 1
decryptors (itself included) signed the very same bytes, and then only if
the labelling is structurally sound.  Reconstruction failures on single
items (bad AEAD, bad signature, foreign round) are skipped, never fatal.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ..crypto.aead import AuthenticationError, RoundMismatch, open_sealed
from ..crypto.group import ORDER
from ..crypto.keys import ClientKeys, Directory
from ..graph import RoundGraph, induced_connected
from .client import MASK_PEER
from .dleq import dleq_prove
from .messages import (
    OFFLINE,
    ONLINE,
    DecryptionRequest,
    DecryptorResponse,
    RequestBundle,
    SignedCiphertext,
    SignedRequest,
)


class CheckFailure(str, enum.Enum):
    QUORUM = "quorum"
    SIZE = "size"
    CONNECTIVITY = "connectivity"
    NEIGHBORS = "neighbors"
    LABELS = "labels"
    ROUND = "round"


@dataclass
class CrossCheckState:
    decryptor: int
    t: int
    decryptors: tuple[int, ...]
    ell: int
    bundle: RequestBundle | None = None
    own: SignedRequest | None = None
    accepted: DecryptionRequest | None = None
    abort: CheckFailure | None = None
    skipped: list = field(default_factory=list)  # (client, peer, reason) of ignored items

    @property
    def quorum(self) -> int:
        return 2 * self.ell + 1


def decryptor_sign_request(state: CrossCheckState, keys: ClientKeys, bundle: RequestBundle) -> SignedRequest | None:
    """Store the server's bundle and sign its request (None if it is for another round)."""
    if state.own is not None:
        return None  # only the first request of the round is signed
    if bundle.request.t != state.t:
        state.abort = CheckFailure.ROUND
        return None
    state.bundle = bundle
    state.own = SignedRequest(state.decryptor, bundle.request, keys.sign(bundle.request.signed_bytes()))
    return state.own


def min_online(n_t: int, delta: float) -> int:
    return math.ceil((1 - delta) * n_t - 1e-9)


def check_labels(
    req: DecryptionRequest, graph: RoundGraph, n_t: int, delta: float, k: int
) -> CheckFailure | None:
    """The structural checks on an agreed request; None when all pass."""
    ids = [i for i, _ in req.labels]
    if (
        len(ids) != len(set(ids))
        or set(ids) != set(graph.members)
        or any(lab not in (ONLINE, OFFLINE) for _, lab in req.labels)
    ):
        return CheckFailure.LABELS
    online = req.online()
    if len(online) < min_online(n_t, delta):
        return CheckFailure.SIZE
    if not induced_connected(graph, online):
        return CheckFailure.CONNECTIVITY
    if any(graph.degree(i, online) < k for i in online):
        return CheckFailure.NEIGHBORS
    return None


def decryptor_cross_check(
    state: CrossCheckState,
    signed_reqs: Iterable[SignedRequest],
    graph: RoundGraph,
    directory: Directory,
    n_t: int,
    delta: float,
    k: int,
) -> DecryptionRequest | CheckFailure:
    """Agree on req*: 2*ell + 1 identical validly signed copies, then the label checks."""
    if state.abort is not None:
        return state.abort
    if state.own is None:
        state.abort = CheckFailure.QUORUM
        return state.abort
    members = set(state.decryptors)
    votes: dict[bytes, set] = {state.own.request.digest(): {state.decryptor}}
    reqs = {state.own.request.digest(): state.own.request}
    for sr in signed_reqs:
        if sr.decryptor not in members or sr.decryptor == state.decryptor:
            continue
        if sr.request.t != state.t:
            continue  # foreign round: ignored
        if not directory.verify(sr.decryptor, sr.request.signed_bytes(), sr.sig):
            continue
        dig = sr.request.digest()
        votes.setdefault(dig, set()).add(sr.decryptor)
        reqs.setdefault(dig, sr.request)
    best = max(votes, key=lambda dg: (len(votes[dg]), dg))
    if len(votes[best]) < state.quorum:
        state.abort = CheckFailure.QUORUM
        return state.abort
    req = reqs[best]
    failure = check_labels(req, graph, n_t, delta, k)
    if failure is not None:
        state.abort = failure
        return failure
    state.accepted = req
    return req


def _valid_ct(sc: SignedCiphertext, client: int, peer: int, t: int, directory: Directory) -> str | None:
    if sc.client != client or sc.peer != peer:
        return "misfiled"
    if sc.t != t:
        return "round"
    if not directory.verify(sc.client, sc.signed_bytes(), sc.sig):
        return "signature"
    return None


def decryptor_reconstruct(
    state: CrossCheckState,
    keys: ClientKeys,
    share_value: int,
    directory: Directory,
    graph: RoundGraph,
    robust: bool = False,
    rng=None,
) -> DecryptorResponse | None:
    """Answer for the accepted request; None if the cross-check did not accept.

    Online client i: the decrypted share m_{i,u,t} (robust mode: c0^{s_u} on
    the ElGamal ciphertext of m_{i,t}).  Offline client i: c0^{s_u} on each
    ciphertext of h_{i,j,t} sent by an online neighbour j.  Partials are keyed
    by (i, j), with j = 0 for the individual mask.
    """
    req = state.accepted
    if req is None or state.bundle is None:
        return None
    t = state.t
    online = req.online()
    atts = state.bundle.by_client()
    out = DecryptorResponse(state.decryptor, t)

    def emit(key, c0):
        partial = c0 * share_value
        out.partials[key] = partial
        if robust:
            out.proofs[key] = dleq_prove(share_value, c0, rng, c0_s=partial)

    for i, label in req.labels:
        att = atts.get(i)
        if att is None:
            continue
        if label == ONLINE and not robust:
            try:
                raw = open_sealed(keys.channel_key(directory[i]), att.share, t)
            except RoundMismatch:
                state.skipped.append((i, MASK_PEER, "round"))
                continue
            except (AuthenticationError, KeyError):
                state.skipped.append((i, MASK_PEER, "aead"))
                continue
            value = int.from_bytes(raw, "big")
            if len(raw) != 32 or value >= ORDER:
                state.skipped.append((i, MASK_PEER, "encoding"))
                continue
            out.shares[i] = value
        elif label == ONLINE:
            for sc in att.ciphertexts:
                why = _valid_ct(sc, i, MASK_PEER, t, directory)
                if why is not None:
                    state.skipped.append((i, MASK_PEER, why))
                    continue
                emit((i, MASK_PEER), sc.ct.c0)
                break
        else:
            expected = graph.neighbors(i) & online
            for sc in att.ciphertexts:
                # the ciphertext of h_{i,j,t} was produced and signed by neighbour j
                j = sc.client
                if j not in expected:
                    state.skipped.append((i, j, "not-a-live-neighbour"))
                    continue
                if (i, j) in out.partials:
                    continue
                why = _valid_ct(sc, j, i, t, directory)
                if why is not None:
                    state.skipped.append((i, j, why))
                    continue
                emit((i, j), sc.ct.c0)
    return out


def new_state(decryptor: int, t: int, decryptors: Sequence[int], ell: int) -> CrossCheckState:
    return CrossCheckState(decryptor, t, tuple(sorted(decryptors)), ell)
