"""Server role: partial sum, decryption request, and the final unmasking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..crypto.elgamal import Ciphertext, combine_with
from ..crypto.group import ORDER, Point
from ..crypto.hash_to_curve import group_to_seed
from ..crypto.prg import LAMBDA_BYTES, seed_with_model
from ..crypto.shamir import lagrange_coefficients
from ..graph import RoundGraph
from .client import MASK_PEER, apply_mask, individual_seed, pair_sign
from .dleq import dleq_verify
from .messages import Attachment, DecryptionRequest, DecryptorResponse, MaskedVector, RequestBundle


def well_formed(mv: MaskedVector, graph: RoundGraph, t: int, L: int, d: int, robust: bool) -> bool:
    """Structural validation of a report; signatures are left to the decryptors."""
    i = mv.client
    if i not in graph.adjacency or mv.t != t:
        return False
    vec = np.asarray(mv.vec)
    if vec.shape != (d,) or vec.dtype != np.uint32:
        return False
    if robust:
        if mv.mask is None or mv.mask.client != i or mv.mask.peer != MASK_PEER or mv.shares:
            return False
    elif len(mv.shares) != L or mv.mask is not None:
        return False
    peers = [p.peer for p in mv.pairs]
    if any(p.client != i for p in mv.pairs) or len(set(peers)) != len(peers):
        return False
    return set(peers) == graph.neighbors(i)


@dataclass
class CollectResult:
    t: int
    partial_sum: np.ndarray
    request: DecryptionRequest
    bundles: dict[int, RequestBundle]  # decryptor -> what it is sent
    reports: dict[int, MaskedVector]  # accepted reports, i.e. Q_vec

    @property
    def online(self) -> frozenset:
        return frozenset(self.reports)

    def pair_ciphertext(self, offline: int, neighbor: int) -> Ciphertext | None:
        mv = self.reports.get(neighbor)
        if mv is None:
            return None
        for p in mv.pairs:
            if p.peer == offline:
                return p.ct
        return None

    def mask_ciphertext(self, client: int) -> Ciphertext | None:
        mv = self.reports.get(client)
        return None if mv is None or mv.mask is None else mv.mask.ct


def build_bundles(
    request: DecryptionRequest,
    reports: Mapping[int, MaskedVector],
    graph: RoundGraph,
    decryptors: Sequence[int],
    robust: bool,
) -> dict[int, RequestBundle]:
    """E_i for every decryptor, consistent with the labels in ``request``."""
    dec = tuple(sorted(decryptors))
    online = request.online()
    # ciphertexts of h_{i,j,t} for offline i, taken from the online neighbours' reports
    offline_cts: dict[int, tuple] = {}
    for i in sorted(request.offline()):
        cts = []
        for j in sorted(graph.neighbors(i) & online):
            mv = reports.get(j)
            if mv is None:
                continue
            cts.extend(p for p in mv.pairs if p.peer == i)
        offline_cts[i] = tuple(cts)
    bundles = {}
    for pos, u in enumerate(dec):
        atts = []
        for i, _ in request.labels:
            if i in offline_cts:
                if offline_cts[i]:
                    atts.append(Attachment(i, ciphertexts=offline_cts[i]))
            elif i in reports:
                mv = reports[i]
                if robust:
                    atts.append(Attachment(i, ciphertexts=(mv.mask,)))
                else:
                    atts.append(Attachment(i, share=mv.shares[pos]))
        bundles[u] = RequestBundle(request, tuple(atts))
    return bundles


def server_collect(
    reports: Iterable[MaskedVector],
    graph: RoundGraph,
    t: int,
    decryptors: Sequence[int],
    d: int,
    robust: bool = False,
    server_id: int = 0,
) -> CollectResult:
    """z~_t over the well-formed reports and the labelled request (Q_vec online)."""
    L = len(decryptors)
    accepted: dict[int, MaskedVector] = {}
    for mv in reports:
        if mv.client not in accepted and well_formed(mv, graph, t, L, d, robust):
            accepted[mv.client] = mv
    z = np.zeros(d, dtype=np.uint32)
    for i in sorted(accepted):
        z += accepted[i].vec
    request = DecryptionRequest.build(t, graph.members, accepted, server_id)
    bundles = build_bundles(request, accepted, graph, decryptors, robust)
    return CollectResult(t, z, request, bundles, accepted)


@dataclass
class FinalizeResult:
    total: np.ndarray | None
    abort: str | None = None
    used: tuple[int, ...] = ()  # decryptors whose answers were combined
    excluded: tuple[int, ...] = ()  # decryptors dropped for a failing proof
    recovered_pairs: int = 0

    @property
    def ok(self) -> bool:
        return self.abort is None


@dataclass
class _Combiner:
    """Interpolation over the first ell + 1 usable responders, one beta set."""

    positions: dict[int, int]
    order: list  # responses in arrival order
    ell: int
    _beta: dict = field(default_factory=dict)

    def pick(self, has) -> dict | None:
        """{position: response} for ell + 1 responders satisfying ``has``."""
        chosen = [r for r in self.order if has(r)][: self.ell + 1]
        if len(chosen) < self.ell + 1:
            return None
        return {self.positions[r.decryptor]: r for r in chosen}

    def beta(self, positions) -> dict:
        key = tuple(sorted(positions))
        b = self._beta.get(key)
        if b is None:
            b = self._beta[key] = lagrange_coefficients(key)
        return b


def _ciphertext_for(collect: CollectResult, key: tuple[int, int]) -> Ciphertext | None:
    i, j = key
    if j == MASK_PEER:
        return collect.mask_ciphertext(i)
    return collect.pair_ciphertext(i, j)


def _proofs_ok(resp: DecryptorResponse, collect: CollectResult, vk: Point | None) -> bool:
    if vk is None:
        return False
    for key, partial in resp.partials.items():
        ct = _ciphertext_for(collect, key)
        proof = resp.proofs.get(key)
        if ct is None or proof is None or not dleq_verify(proof, ct.c0, partial, vk):
            return False
    return True


def server_finalize(
    collect: CollectResult,
    responses: Iterable[DecryptorResponse],
    graph: RoundGraph,
    decryptors: Sequence[int],
    ell: int,
    robust: bool = False,
    model_hash: bytes | None = None,
    verification_keys: Mapping[int, Point] | None = None,
    request: DecryptionRequest | None = None,
) -> FinalizeResult:
    """z_t = z~_t - sum_online PRG(m_i) - sum_offline sum_j sign(j, i) PRG(h_{i,j,t}).

    ``responses`` are taken in arrival order; the first ell + 1 usable ones
    determine one set of Lagrange coefficients that is reused for every
    item.  In robust mode each responder's proofs are checked first and a
    responder with any failing proof is excluded as a whole.
    """
    t = collect.t
    req = request or collect.request
    dec = tuple(sorted(decryptors))
    positions = {u: p for p, u in enumerate(dec, 1)}
    seen = set()
    order = []
    for r in responses:
        if r.decryptor in positions and r.decryptor not in seen and r.t == t:
            seen.add(r.decryptor)
            order.append(r)
    excluded = []
    if robust:
        vks = verification_keys or {}
        keep = []
        for r in order:
            (keep if _proofs_ok(r, collect, vks.get(r.decryptor)) else excluded).append(r)
        order = keep
    if len(order) < ell + 1:
        return FinalizeResult(None, "insufficient-responses", excluded=tuple(r.decryptor for r in excluded))
    comb = _Combiner(positions, order, ell)
    default = comb.pick(lambda r: True)
    used = set()

    def combine(key) -> Point | None:
        chosen = default
        if not all(key in r.partials for r in chosen.values()):
            chosen = comb.pick(lambda r: key in r.partials)  # per-item fallback
            if chosen is None:
                return None
        used.update(r.decryptor for r in chosen.values())
        beta = comb.beta(chosen)
        return combine_with({p: r.partials[key] for p, r in chosen.items()}, beta)

    z = collect.partial_sum.copy()
    online = req.online()
    for i in sorted(online):
        if robust:
            ct = collect.mask_ciphertext(i)
            c0_sk = combine((i, MASK_PEER)) if ct is not None else None
            if c0_sk is None:
                return _fail("insufficient-partials", excluded)
            m = ct.c1 - c0_sk
            if m.is_identity:
                return _fail("reconstruction", excluded)
        else:
            chosen = default
            if not all(i in r.shares for r in chosen.values()):
                chosen = comb.pick(lambda r: i in r.shares)
                if chosen is None:
                    return _fail("insufficient-shares", excluded)
            used.update(r.decryptor for r in chosen.values())
            beta = comb.beta(chosen)
            value = sum(beta[p] * r.shares[i] for p, r in chosen.items()) % ORDER
            if value >> (8 * LAMBDA_BYTES):
                return _fail("reconstruction", excluded)
            m = value.to_bytes(LAMBDA_BYTES, "big")
        apply_mask(z, individual_seed(m, model_hash), -1)

    recovered = 0
    for i in sorted(req.offline()):
        for j in sorted(graph.neighbors(i) & online):
            ct = collect.pair_ciphertext(i, j)
            c0_sk = combine((i, j)) if ct is not None else None
            if c0_sk is None:
                return _fail("insufficient-partials", excluded)
            h = group_to_seed(ct.c1 - c0_sk)
            apply_mask(z, seed_with_model(h, model_hash), -pair_sign(j, i))
            recovered += 1
    return FinalizeResult(z, None, tuple(sorted(used)), tuple(r.decryptor for r in excluded), recovered)


def _fail(reason: str, excluded) -> FinalizeResult:
    return FinalizeResult(None, reason, excluded=tuple(r.decryptor for r in excluded))


def tau(request: DecryptionRequest) -> float:
    """Sum accuracy: |online| / |S_t|."""
    n = len(request.labels)
    return len(request.online()) / n if n else 0.0
